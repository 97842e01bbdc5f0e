#!/usr/bin/env python3
"""Reference AC optimal power flow solves for the bundled case files.

Solves the polar-coordinate OPF (voltage magnitudes/angles, generator
injections) with scipy's trust-constr NLP solver and exact first
derivatives. Used once to produce data/opf_reference.json, which the
acceptance suite compares objectives against. Independent of the C++
solver: different formulation, different algorithm, different language.

Usage: python3 tools/polar_reference.py data/case9.m [more cases ...]
"""
import json
import re
import sys

import numpy as np
from scipy import sparse
from scipy.optimize import NonlinearConstraint, minimize


def parse_matrix(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    if m is None:
        raise ValueError("missing mpc.%s" % name)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";").strip()
        if not line:
            continue
        rows.append([float(t) for t in line.split()])
    return np.array(rows)


def load_case(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)\s*;", text).group(1))
    bus = parse_matrix(text, "bus")
    gen = parse_matrix(text, "gen")
    branch = parse_matrix(text, "branch")
    gencost = parse_matrix(text, "gencost")
    branch = branch[branch[:, 10] != 0]  # in-service only
    gen = gen[gen[:, 7] != 0]
    return base, bus, gen, branch, gencost


def admittance(base, bus, branch):
    nb = bus.shape[0]
    id2i = {int(b[0]): i for i, b in enumerate(bus)}
    f = np.array([id2i[int(b[0])] for b in branch])
    t = np.array([id2i[int(b[1])] for b in branch])
    ys = 1.0 / (branch[:, 2] + 1j * branch[:, 3])
    bc = branch[:, 4]
    tap = np.where(branch[:, 8] == 0, 1.0, branch[:, 8]) * np.exp(1j * np.deg2rad(branch[:, 9]))
    ytt = ys + 1j * bc / 2
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap
    ysh = (bus[:, 4] + 1j * bus[:, 5]) / base
    nl = branch.shape[0]
    Cf = sparse.csr_matrix((np.ones(nl), (np.arange(nl), f)), (nl, nb))
    Ct = sparse.csr_matrix((np.ones(nl), (np.arange(nl), t)), (nl, nb))
    Yf = sparse.diags(yff) @ Cf + sparse.diags(yft) @ Ct
    Yt = sparse.diags(ytf) @ Cf + sparse.diags(ytt) @ Ct
    Ybus = Cf.T @ Yf + Ct.T @ Yt + sparse.diags(ysh)
    return Ybus.tocsr(), Yf.tocsr(), Yt.tocsr(), f, t


def solve_case(path):
    base, bus, gen, branch, gencost = load_case(path)
    nb, ng, nl = bus.shape[0], gen.shape[0], branch.shape[0]
    Ybus, Yf, Yt, fidx, tidx = admittance(base, bus, branch)
    id2i = {int(b[0]): i for i, b in enumerate(bus)}
    gbus = np.array([id2i[int(g[0])] for g in gen])
    Cg = sparse.csr_matrix((np.ones(ng), (gbus, np.arange(ng))), (nb, ng))
    Pd, Qd = bus[:, 2] / base, bus[:, 3] / base
    ref = int(np.where(bus[:, 1] == 3)[0][0])

    # x = [va(nb), vm(nb), p(ng), q(ng)]
    iva, ivm, ip, iq = 0, nb, 2 * nb, 2 * nb + ng
    n = 2 * nb + 2 * ng

    c2 = gencost[:, 4] * base * base
    c1 = gencost[:, 5] * base
    c0 = float(np.sum(gencost[:, 6]))

    def split(x):
        return x[iva:iva + nb], x[ivm:ivm + nb], x[ip:ip + ng], x[iq:iq + ng]

    def fobj(x):
        p = x[ip:ip + ng]
        return float(np.sum(c2 * p * p + c1 * p) + c0)

    def gobj(x):
        g = np.zeros(n)
        p = x[ip:ip + ng]
        g[ip:ip + ng] = 2 * c2 * p + c1
        return g

    def dSbus_dV(V):
        Ibus = Ybus @ V
        dVm = sparse.diags(V / np.abs(V))
        dSdVa = 1j * sparse.diags(V) @ np.conj(sparse.diags(Ibus) - Ybus @ sparse.diags(V))
        dSdVm = sparse.diags(V) @ np.conj(Ybus @ dVm) + sparse.diags(np.conj(Ibus)) @ dVm
        return dSdVa, dSdVm

    def balance(x):
        va, vm, p, q = split(x)
        V = vm * np.exp(1j * va)
        S = V * np.conj(Ybus @ V)
        mis = Cg @ (p + 1j * q) - (Pd + 1j * Qd) - S
        return np.concatenate([mis.real, mis.imag])

    def balance_jac(x):
        va, vm, p, q = split(x)
        V = vm * np.exp(1j * va)
        dSdVa, dSdVm = dSbus_dV(V)
        Jp = sparse.hstack([-dSdVa.real, -dSdVm.real, Cg, sparse.csr_matrix((nb, ng))])
        Jq = sparse.hstack([-dSdVa.imag, -dSdVm.imag, sparse.csr_matrix((nb, ng)), Cg])
        return sparse.vstack([Jp, Jq]).tocsr()

    rated = np.where(branch[:, 5] > 0)[0]
    rate2 = (branch[rated, 5] / base) ** 2

    def flows(x):
        va, vm, _, _ = split(x)
        V = vm * np.exp(1j * va)
        Sf = V[fidx] * np.conj(Yf @ V)
        St = V[tidx] * np.conj(Yt @ V)
        return Sf, St, V

    def line_con(x):
        Sf, St, _ = flows(x)
        return np.concatenate([np.abs(Sf[rated]) ** 2, np.abs(St[rated]) ** 2])

    def line_jac(x):
        va, vm, _, _ = split(x)
        V = vm * np.exp(1j * va)
        out = []
        for Y, side in ((Yf, fidx), (Yt, tidx)):
            I = Y @ V
            S = V[side] * np.conj(I)
            Cs = sparse.csr_matrix((np.ones(nl), (np.arange(nl), side)), (nl, nb))
            dSdVa = 1j * (sparse.diags(np.conj(I)) @ Cs @ sparse.diags(V)
                          - sparse.diags(V[side]) @ np.conj(Y @ sparse.diags(V)))
            dVmn = sparse.diags(V / np.abs(V))
            dSdVm = sparse.diags(np.conj(I)) @ Cs @ dVmn + sparse.diags(V[side]) @ np.conj(Y @ dVmn)
            dSdVa, dSdVm = dSdVa[rated], dSdVm[rated]
            Sr = S[rated]
            dmag = sparse.hstack([
                2 * (sparse.diags(Sr.real) @ dSdVa.real + sparse.diags(Sr.imag) @ dSdVa.imag),
                2 * (sparse.diags(Sr.real) @ dSdVm.real + sparse.diags(Sr.imag) @ dSdVm.imag),
                sparse.csr_matrix((len(rated), 2 * ng))])
            out.append(dmag)
        return sparse.vstack(out).tocsr()

    lb = np.concatenate([np.full(nb, -np.pi), bus[:, 12], gen[:, 9] / base, gen[:, 4] / base])
    ub = np.concatenate([np.full(nb, np.pi), bus[:, 11], gen[:, 8] / base, gen[:, 3] / base])
    lb[iva + ref] = ub[iva + ref] = 0.0

    x0 = np.zeros(n)
    x0[ivm:ivm + nb] = np.clip(1.0, lb[ivm:ivm + nb], ub[ivm:ivm + nb])
    share = Pd.sum() * 1.02 / max(1e-9, (gen[:, 8] / base).sum())
    x0[ip:ip + ng] = np.clip(share * gen[:, 8] / base, lb[ip:ip + ng], ub[ip:ip + ng])
    x0[iq:iq + ng] = np.clip(0.0, lb[iq:iq + ng], ub[iq:iq + ng])

    cons = [NonlinearConstraint(balance, 0, 0, jac=balance_jac)]
    if len(rated):
        cons.append(NonlinearConstraint(line_con, -np.inf, np.concatenate([rate2, rate2]),
                                        jac=line_jac))
    res = minimize(fobj, x0, jac=gobj, method="trust-constr",
                   constraints=cons, bounds=list(zip(lb, ub)),
                   options={"maxiter": 6000, "gtol": 1e-10, "xtol": 1e-14, "verbose": 0})
    viol = float(np.max(np.abs(balance(res.x))))
    Sf, St, V = flows(res.x)
    return {
        "objective": float(res.fun),
        "balance_violation": viol,
        "vm_range": [float(np.abs(V).min()), float(np.abs(V).max())],
        "success": bool(res.status in (1, 2)) and viol < 1e-6,
        "flow_mva": (np.maximum(np.abs(Sf), np.abs(St)) * base).tolist(),
    }


def main():
    out = {}
    for path in sys.argv[1:]:
        name = path.split("/")[-1].replace(".m", "")
        r = solve_case(path)
        print("%-14s obj=%.4f  viol=%.2e  vm=[%.4f,%.4f]  ok=%s"
              % (name, r["objective"], r["balance_violation"],
                 r["vm_range"][0], r["vm_range"][1], r["success"]))
        out[name] = {"objective": r["objective"], "balance_violation": r["balance_violation"]}
    with open("data/opf_reference.json", "w") as fh:
        json.dump(out, fh, indent=2)
    print("wrote data/opf_reference.json")


if __name__ == "__main__":
    main()
