"""
Reproducing the trend sweeps
============================

Every shipped sweep runs in a few seconds at desk scale.  The table below
prints the per-value mean of one headline metric per sweep.
"""
from bpvec.experiments import load_spec, run_experiment, shipped_specs

headline = {"fig3a": "eps_mean", "fig3b": "eps_mean", "fig3c": "eps_mean", "fig4": "avg_rv_utility",
            "fig5_pv": "avg_pv_utility", "fig5_rsu": "avg_rsu_utility", "fig6a": "consensus_energy_pv_total_J",
            "fig6b": "consensus_energy_pv_total_J", "fig7": "avg_pv_utility"}

for name, path in shipped_specs().items():
    spec = load_spec(path)
    table = run_experiment(spec)
    metric = headline.get(name, "avg_rv_utility")
    print(f"\n{name}: {spec.description}")
    print(f"  {metric} against {spec.sweep_variable}")
    for scheme in spec.schemes:
        row = "  ".join(f"{v:g}:{m:.4g}" for v, m in table.mean(scheme, metric))
        print(f"  {scheme:>18}  {row}")
