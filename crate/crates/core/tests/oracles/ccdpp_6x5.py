import numpy as np
# 6x5 fixture: (user, item, rating)
E = [(0,0,5.0),(0,1,3.0),(0,3,1.0),(1,0,4.0),(1,4,2.0),(2,1,1.0),(2,2,4.0),(2,3,5.0),
     (3,0,1.5),(3,2,2.5),(3,4,4.0),(4,1,3.5),(4,3,2.0),(4,4,1.0),(5,2,4.5)]
lam = 0.1
v0 = np.array([0.8, -0.3, 1.1, 0.5, 0.9])
A = np.full((6,5), np.nan)
for i,j,r in E: A[i,j]=r
def ls(y, x, lam):
    # ridge least squares in one unknown, via lstsq on augmented system
    X = np.concatenate([x, [np.sqrt(lam)]])[:,None]
    Y = np.concatenate([y, [0.0]])
    return np.linalg.lstsq(X, Y, rcond=None)[0][0]
u = np.zeros(6)
for i in range(6):
    m = ~np.isnan(A[i]); u[i] = ls(A[i,m], v0[m], lam)
v = np.zeros(5)
for j in range(5):
    m = ~np.isnan(A[:,j]); v[j] = ls(A[m,j], u[m], lam)
np.set_printoptions(precision=17)
print("u", repr(u)); print("v", repr(v))
