"""Reflected inertia of a geared rotor.

With q_R = eta q_L the rotor adds eta^2 I_R to the link's inertia.  The
cluster algorithm, the KKT oracle and the closed form should all agree.
"""

import numpy as np

from clusterdyn import DynamicsState, cluster_aba, kkt_forward_dynamics
from clusterdyn.generators import gear_pair

I_L, I_R, tau = 0.7, 0.02, 1.0
for eta in (1.0, 6.0, 9.0, 33.45):
    m = gear_pair(eta=eta, I_L=I_L, I_R=I_R)
    y = np.zeros(1)
    aba = cluster_aba(m, DynamicsState(y=y, yd=y, tau=np.array([tau])), gravity=(0, 0, 0)).ydd[0]
    kkt = kkt_forward_dynamics(m, np.zeros(2), np.zeros(2), np.array([tau, 0.0]), (0, 0, 0)).qdd[0]
    exact = tau / (I_L + eta ** 2 * I_R)
    print(f"eta {eta:6.2f}  closed form {exact:.12f}  cluster-aba {aba:.12f}  kkt {kkt:.12f}")
