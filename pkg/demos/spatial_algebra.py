"""Plücker transforms in six dimensions: composition, duality and power."""

import numpy as np

from clusterdyn.spatial import crf, crm, random_inertia, random_transform

rng = np.random.default_rng(1)
X1, X2 = random_transform(rng), random_transform(rng)
v, f = rng.standard_normal(6), rng.standard_normal(6)

X = X1 @ X2
print("composition matches matrices:", np.allclose(X.matrix(), X1.matrix() @ X2.matrix()))
print("force transform is inverse transpose:",
      np.allclose(X.force_matrix(), np.linalg.inv(X.matrix()).T))
print("power invariant:", float(v @ f), float((X.matrix() @ v) @ (X.force_matrix() @ f)))
print("crf = -crm^T:", np.allclose(crf(v), -crm(v).T))
I = random_inertia(rng)
print("inertia eigenvalues:", np.round(np.linalg.eigvalsh(I.matrix()), 4))
