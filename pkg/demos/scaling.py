"""Operation counts as the chain of link-rotor clusters grows.

Cluster-ABA stays linear in the number of clusters, while the dense KKT
oracle grows superlinearly.
"""

from clusterdyn.bench import BenchmarkSpec, linear_fit_r2, run_benchmark

depths = [2, 4, 8, 16]
rows = run_benchmark(BenchmarkSpec(mechanism="link-rotor", depths=depths,
                                   algorithms=["cluster-aba", "kkt"]))
for r in rows:
    print(f"d_a {r['d_a']:3d}  {r['algorithm']:12s} total {r['total']:7d}")
aba = [r["total"] for r in rows if r["algorithm"] == "cluster-aba"]
print(f"cluster-aba linear fit R^2 = {linear_fit_r2(depths, aba):.6f}")
