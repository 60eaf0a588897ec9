"""Symbolic Lagrangian of the suspended block, used to freeze test fixtures.

Chain: pivot -> Rx(q1) Ry(q2) -> cable of length L -> attachment point
-> Rx(q3) Ry(q4) Rz(q5) -> COG at distance d below the attachment along
the block's vertical axis. Inertia of a uniform cuboid about its COG.

Run: python3 lagrangian_oracle.py > ../fixtures/lagrangian_oracle.json
"""
import json

import sympy as sp

q = sp.symbols("q1:6")
qd = sp.symbols("qd1:6")
m, L, d, g = sp.symbols("m L d g", positive=True)
ixx, iyy, izz = sp.symbols("ixx iyy izz", positive=True)


def rx(a):
    return sp.Matrix([[1, 0, 0], [0, sp.cos(a), -sp.sin(a)], [0, sp.sin(a), sp.cos(a)]])


def ry(a):
    return sp.Matrix([[sp.cos(a), 0, sp.sin(a)], [0, 1, 0], [-sp.sin(a), 0, sp.cos(a)]])


def rz(a):
    return sp.Matrix([[sp.cos(a), -sp.sin(a), 0], [sp.sin(a), sp.cos(a), 0], [0, 0, 1]])


r_cable = rx(q[0]) * ry(q[1])
r_block = r_cable * rx(q[2]) * ry(q[3]) * rz(q[4])
p_att = r_cable * sp.Matrix([0, 0, -L])
p_cog = p_att + r_block * sp.Matrix([0, 0, -d])

t = sp.symbols("t")
subs_t = {q[i]: sp.Function(f"Q{i}")(t) for i in range(5)}
back = {}
for i in range(5):
    back[sp.Derivative(subs_t[q[i]], t)] = qd[i]
for i in range(5):
    back[subs_t[q[i]]] = q[i]


def time_diff(expr):
    return sp.diff(expr.subs(subs_t), t).subs(back)


v_cog = p_cog.applyfunc(time_diff)
r_dot = r_block.applyfunc(time_diff)
omega_hat = r_block.T * r_dot
omega_b = sp.Matrix([omega_hat[2, 1], omega_hat[0, 2], omega_hat[1, 0]])
inertia = sp.diag(ixx, iyy, izz)

kinetic = sp.Rational(1, 2) * m * (v_cog.T * v_cog)[0] + sp.Rational(1, 2) * (omega_b.T * inertia * omega_b)[0]
potential = m * g * (p_cog[2] + L + d)

mass = sp.Matrix(5, 5, lambda i, j: sp.diff(kinetic, qd[i], qd[j]))
grav = sp.Matrix([sp.diff(potential, qi) for qi in q])

mval, lval, dval, gval = 22.0, 1.215, 0.1, 9.81
w, h, th = 0.8, 0.6, 0.2
params = {
    m: mval,
    L: lval,
    d: dval,
    g: gval,
    ixx: mval / 12 * (h**2 + th**2),
    iyy: mval / 12 * (w**2 + th**2),
    izz: mval / 12 * (w**2 + h**2),
}


def num(mat, qv, qdv=None):
    s = dict(params)
    s.update({q[i]: qv[i] for i in range(5)})
    if qdv is not None:
        s.update({qd[i]: qdv[i] for i in range(5)})
    return [[float(sp.N(mat[i, j].subs(s), 20)) for j in range(mat.cols)] for i in range(mat.rows)]


zero = [0.0] * 5
q_probe = [0.3, -0.2, 0.5, 0.4, -0.7]
qd_probe = [0.4, -0.6, 1.1, -0.3, 0.8]

# Lagrange equations: B qdd + (dB/dt qd - dT/dq) + grav = 0
mass_dot = mass.applyfunc(lambda e: sum(sp.diff(e, q[k]) * qd[k] for k in range(5)))
dT_dq = sp.Matrix([sp.diff(kinetic, qi) for qi in q])
bias = mass_dot * sp.Matrix(qd) - dT_dq + grav

b_probe = sp.Matrix(num(mass, q_probe))
bias_probe = sp.Matrix(num(bias, q_probe, qd_probe))
qdd_probe = -b_probe.LUsolve(bias_probe)

energy_expr = kinetic + potential
out = {
    "params": {"mass": mval, "cable_length": lval, "cog_offset": dval, "gravity": gval, "block_dims": [w, h, th]},
    "mass_matrix_at_zero": num(mass, zero),
    "q_probe": q_probe,
    "qd_probe": qd_probe,
    "mass_matrix_at_probe": num(mass, q_probe),
    "gravity_at_probe": [r[0] for r in num(grav, q_probe)],
    "acceleration_at_probe": [float(v) for v in qdd_probe],
    "energy_at_probe": float(sp.N(energy_expr.subs({**params, **{q[i]: q_probe[i] for i in range(5)}, **{qd[i]: qd_probe[i] for i in range(5)}}), 20)),
    "potential_q1_0p2": float(sp.N(potential.subs({**params, q[0]: 0.2, q[1]: 0, q[2]: 0, q[3]: 0, q[4]: 0}), 20)),
}
print(json.dumps(out, indent=2))
