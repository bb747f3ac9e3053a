"""Independent power-flow reference for the embedded IEEE 14-bus case.

Complex bus-admittance formulation with a numerically differentiated Newton
iteration; shares no code with the C++ solver. Prints frozen values used by
test_power_flow.cpp.
"""
import numpy as np

branches = [
    (1, 2, 0.01938, 0.05917, 0.0528), (1, 5, 0.05403, 0.22304, 0.0492),
    (2, 3, 0.04699, 0.19797, 0.0438), (2, 4, 0.05811, 0.17632, 0.0340),
    (2, 5, 0.05695, 0.17388, 0.0346), (3, 4, 0.06701, 0.17103, 0.0128),
    (4, 5, 0.01335, 0.04211, 0.0), (4, 7, 0.0, 0.20912, 0.0),
    (4, 9, 0.0, 0.55618, 0.0), (5, 6, 0.0, 0.25202, 0.0),
    (6, 11, 0.09498, 0.19890, 0.0), (6, 12, 0.12291, 0.25581, 0.0),
    (6, 13, 0.06615, 0.13027, 0.0), (7, 8, 0.0, 0.17615, 0.0),
    (7, 9, 0.0, 0.11001, 0.0), (9, 10, 0.03181, 0.08450, 0.0),
    (9, 14, 0.12711, 0.27038, 0.0), (10, 11, 0.08205, 0.19207, 0.0),
    (12, 13, 0.22092, 0.19988, 0.0), (13, 14, 0.17093, 0.34802, 0.0),
]
pd = np.array([0, 21.7, 94.2, 47.8, 7.6, 11.2, 0, 0, 29.5, 9, 3.5, 6.1, 13.5, 14.9]) / 100
qd = np.array([0, 12.7, 19, -3.9, 1.6, 7.5, 0, 0, 16.6, 5.8, 1.8, 1.6, 5.8, 5]) / 100
pg = np.zeros(14); pg[1] = 0.40
vset = {0: 1.06, 1: 1.045, 2: 1.01, 5: 1.07, 7: 1.09}
n = 14
Y = np.zeros((n, n), complex)
for f, t, r, x, b in branches:
    y = 1 / complex(r, x)
    f -= 1; t -= 1
    Y[f, f] += y + 0.5j * b; Y[t, t] += y + 0.5j * b
    Y[f, t] -= y; Y[t, f] -= y

pv = [1, 2, 5, 7]
pq = [i for i in range(n) if i not in pv and i != 0]
ang = [i for i in range(1, n)]

def unpack(u):
    v = np.array([vset.get(i, 1.0) for i in range(n)]); th = np.zeros(n)
    th[ang] = u[:len(ang)]; v[pq] = u[len(ang):]
    return v, th

def F(u):
    v, th = unpack(u)
    V = v * np.exp(1j * th)
    S = V * np.conj(Y @ V)
    return np.concatenate([(pg - pd)[ang] - S.real[ang], (-qd)[pq] - S.imag[pq]])

u = np.concatenate([np.zeros(len(ang)), np.ones(len(pq))])
for _ in range(30):
    f = F(u)
    if np.max(np.abs(f)) < 1e-13:
        break
    J = np.zeros((len(u), len(u)))
    for k in range(len(u)):
        du = np.zeros(len(u)); du[k] = 1e-7
        J[:, k] = (F(u + du) - F(u - du)) / 2e-7
    u = u - np.linalg.solve(J, f)
v, th = unpack(u)
print("mismatch", np.max(np.abs(F(u))))
for i in range(n):
    print(f"bus {i+1}: v={v[i]:.10f} theta={th[i]:.10f}")
