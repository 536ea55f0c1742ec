#!/usr/bin/env python3
"""Regenerate the files under data/ and the frozen oracle values in data/oracle/."""

import argparse
import json
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np


def fmt(v):
    return repr(float(v))


def spectrum_text(name, modes, N=1, gap=None, truncation=None, comment=None):
    lines = []
    if comment:
        lines += ["# " + c for c in comment]
    lines.append(f"name {name}")
    lines.append(f"N {N}")
    if gap is not None:
        lines.append(f"gap {fmt(gap)}")
    if truncation is not None:
        lines.append(f"truncation {fmt(truncation)}")
    for v, mult, sector in sorted(modes, key=lambda m: (m[0], m[2] == "spinor")):
        lines.append(f"mode {fmt(v)} {mult} {sector}")
    return "\n".join(lines) + "\n"


def model_text(name, spectrum, lam, mu, R, gamma=(), comment=None):
    lines = []
    if comment:
        lines += ["# " + c for c in comment]
    lines += ["swfc-model 1", f"name {name}", f"spectrum {spectrum}", f"lambda {fmt(lam)}", f"mu {fmt(mu)}",
              f"R {fmt(R)}", "cutoff 3.0 4.0"]
    for i, j, k, v in gamma:
        lines.append(f"gamma {i} {j} {k} {fmt(v)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Round three-sphere: coexact 1-forms have *d eigenvalues +-(k+2) with
# multiplicity (k+1)(k+3); the Dirac operator has +-(k+3/2) with (k+1)(k+2).

def s3_modes(cut):
    modes = []
    k = 0
    while k + 1.5 <= cut:
        if k + 2 <= cut:
            modes.append((k + 2.0, (k + 1) * (k + 3), "form"))
            modes.append((-(k + 2.0), (k + 1) * (k + 3), "form"))
        modes.append((k + 1.5, (k + 1) * (k + 2), "spinor"))
        modes.append((-(k + 1.5), (k + 1) * (k + 2), "spinor"))
        k += 1
    return modes


def window_dims(modes, lam, mu):
    m = sum(mult for v, mult, s in modes if s == "form" and lam < v <= 0)
    n = sum(mult for v, mult, s in modes if s == "spinor" and lam < v <= 0)
    total = sum(mult * (2 if s == "spinor" else 1) for v, mult, s in modes if lam < v <= mu)
    return {"m": m, "n": n, "total_dim": total}


def coordinates(modes, lam, mu):
    """Real coordinates of a window: (sector, mode value, replica, component)."""
    out = []
    for v, mult, s in sorted(modes, key=lambda m: (m[0], m[2] == "spinor")):
        if not (lam < v <= mu):
            continue
        for r in range(mult):
            if s == "form":
                out.append(("form", v, r, 0))
            else:
                out.append(("spinor", v, r, 0))
                out.append(("spinor", v, r, 1))
    return out


def random_equivariant_gamma(coords, rng, scale):
    """Monomial coefficients of an S^1-invariant cubic: forms^3 and form * Re(z_a conj z_b)."""
    forms = [i for i, c in enumerate(coords) if c[0] == "form"]
    spin = [i for i, c in enumerate(coords) if c[0] == "spinor" and c[3] == 0]
    gamma = []
    for a in range(len(forms)):
        for b in range(a, len(forms)):
            for c in range(b, len(forms)):
                gamma.append((forms[a], forms[b], forms[c], scale * rng.uniform(-1, 1)))
    for f in forms:
        for a in range(len(spin)):
            for b in range(a, len(spin)):
                v = scale * rng.uniform(-1, 1)
                ra, rb = spin[a], spin[b]
                for i, j in ((ra, rb), (ra + 1, rb + 1)):
                    gamma.append(tuple(sorted((f, i, j))) + (v,))
    gamma.sort()
    return gamma


# ---------------------------------------------------------------------------
# Spectral-flow fixtures.

def path_text(name, samples, tolerance=0.01):
    lines = [f"tolerance {fmt(tolerance)}", f"name {name}", "N 1"]
    for t, modes in samples:
        lines.append(f"sample {fmt(t)}")
        for v, mult, s in sorted(modes, key=lambda m: (m[0], m[2] == "spinor")):
            lines.append(f"mode {fmt(v)} {mult} {s}")
    return "\n".join(lines) + "\n"


def sign_change_sf(branches, times, eps):
    """Net upward crossings of -eps by spinor branches, from dense closed-form samples."""
    total = 0
    for f, mult in branches:
        vals = [f(t) + eps for t in np.linspace(0.0, 1.0, 20001)]
        for a, b in zip(vals, vals[1:]):
            if a < 0 <= b:
                total += mult
            elif a >= 0 > b:
                total -= mult
    return total


def n_lambda(values, lam):
    return sum(mult for v, mult, s in values if s == "spinor" and lam < v <= 0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    out = Path(ap.parse_args().out)
    for sub in ("spectra", "models", "paths", "lattice", "manifests", "oracle", "invalid"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    oracle = {}

    def write(rel, text):
        (out / rel).write_text(text)

    # S^3-like spectrum below |v| <= 12.
    s3 = s3_modes(12.0)
    write("spectra/s3_like.spec", spectrum_text("s3_like", s3, gap=1.5, truncation=12.0,
                                                 comment=["round three-sphere eigenvalues with |v| <= 12"]))
    oracle["s3_like"] = {"window": [-10.2, 10.2], **window_dims(s3, -10.2, 10.2),
                         "small_window": [-2.2, 2.2], "small": window_dims(s3, -2.2, 2.2)}
    write("models/s3_like.model", model_text("s3_like", "../spectra/s3_like.spec", -2.2, 2.2, 1.0,
                                             comment=["zero coupling"]))

    # Gapped spectrum with zero coupling.
    gapped = [(-4.5, 1, "form"), (-3.5, 1, "spinor"), (-1.5, 1, "form"), (1.5, 1, "form"), (2.5, 1, "spinor"),
              (4.5, 1, "form")]
    write("spectra/gapped.spec", spectrum_text("gapped", gapped, gap=1.5))
    write("models/gapped.model", model_text("gapped", "../spectra/gapped.spec", -5.0, 5.0, 1.0,
                                            comment=["zero coupling"]))
    oracle["gapped"] = {w: window_dims(gapped, *map(float, w.split(","))) for w in ("-2,2", "-2,3", "-5,5")}

    # Poincare-like: injective, gapped, one negative spinor mode near zero.
    pmodes = [(-2.5, 1, "form"), (-1.25, 1, "spinor"), (1.75, 1, "spinor"), (2.5, 1, "form")]
    write("spectra/poincare_like.spec", spectrum_text("poincare_like", pmodes, gap=1.25))
    pcoords = coordinates(pmodes, -3.0, 3.0)
    pgamma = random_equivariant_gamma(pcoords, np.random.default_rng(17), 0.02)
    write("models/poincare_like.model", model_text("poincare_like", "../spectra/poincare_like.spec", -3.0, 3.0, 1.0,
                                                   pgamma, comment=["small seeded equivariant coupling"]))
    alpha = 3.0 * sum(abs(v) for *_, v in pgamma)
    oracle["poincare_like"] = {**window_dims(pmodes, -3.0, 3.0), "alpha_crude": alpha, "lambda0": 1.25,
                               "R": 1.0, "contraction_holds": alpha * 2.0 < 1.25, "n_invariant": "-1/1",
                               "eta_dir": -1.5, "k_dirac": 0, "eta_sign": 2.0}
    big = [(i, j, k, 40.0 * v) for i, j, k, v in pgamma]
    write("models/poincare_like_strong.model", model_text("poincare_like_strong", "../spectra/poincare_like.spec",
                                                          -3.0, 3.0, 1.0, big,
                                                          comment=["coupling scaled by 40"]))

    # Three-dimensional Seiberg-Witten caricature: x (form) and z (spinor),
    # CSD = x^2/2 + |z|^2/2 + x|z|^2; irreducible circle at x = -1/2.
    dmodes = [(1.0, 1, "form"), (1.0, 1, "spinor")]
    write("spectra/decomposition.spec", spectrum_text("decomposition", dmodes))
    write("models/decomposition.model", model_text("decomposition", "../spectra/decomposition.spec", -1.5, 2.5, 0.75,
                                                   [(0, 1, 1, 1.0), (0, 2, 2, 1.0)],
                                                   comment=["CSD = x^2/2 + |z|^2/2 + x|z|^2"]))
    # Stationary points: z = 0, x = 0; or x = -1/2, |z|^2 = 1/2.
    oracle["decomposition"] = {"irreducible_x": -0.5, "irreducible_r2": 0.5,
                               "irreducible_csd": 0.5 * 0.25 + 0.5 * 0.5 - 0.5 * 0.5}

    # Nonzero coupling for the 2D / 4D window comparison.
    qmodes = [(-1.4, 1, "form"), (-1.2, 1, "spinor"), (1.3, 1, "form"), (3.6, 1, "spinor")]
    write("spectra/pair.spec", spectrum_text("pair", qmodes, gap=1.2))
    qcoords = coordinates(qmodes, -1.5, 1.35)
    qgamma = random_equivariant_gamma(qcoords, np.random.default_rng(42), 0.1)
    write("models/pair.model", model_text("pair", "../spectra/pair.spec", -1.5, 1.35, 1.0, qgamma,
                                          comment=["seeded equivariant coupling, seed 42, scale 0.1"]))
    alpha_q = 3.0 * sum(abs(v) for *_, v in qgamma)
    oracle["pair"] = {"small": window_dims(qmodes, -1.3, 1.2), "large": window_dims(qmodes, -1.5, 1.35),
                      "alpha_crude": alpha_q, "contraction_holds": alpha_q * 2.0 < 1.2}

    # Eta toy: +(k+1) and -(k+3/2), eta(s) = zeta(s) - zeta(s, 3/2).
    lam_cut = 1000.0
    toy = [(k + 1.0, 1, "spinor") for k in range(int(lam_cut))]
    toy += [(-(k + 1.5), 1, "spinor") for k in range(int(lam_cut)) if k + 1.5 <= lam_cut]
    write("spectra/eta_toy.spec", spectrum_text("eta_toy", toy, truncation=lam_cut,
                                                comment=["+(k+1) and -(k+3/2), k >= 0"]))
    eta_closed = mpmath.zeta(0) - mpmath.zeta(0, 1.5)
    oracle["eta_toy"] = {"eta": float(eta_closed), "truncation": lam_cut}
    sym = [(k + 1.0, (k + 1) ** 2, "spinor") for k in range(200)] + [(-(k + 1.0), (k + 1) ** 2, "spinor")
                                                                      for k in range(200)]
    write("spectra/eta_symmetric.spec", spectrum_text("eta_symmetric", sym, truncation=200.0))
    write("spectra/eta_symmetric_raw.spec",
          spectrum_text("eta_symmetric_raw", [(0.5, 2, "spinor"), (-0.5, 2, "spinor"), (3.0, 1, "form"),
                                              (-3.0, 1, "form"), (0.0, 1, "spinor")]))
    oracle["eta_symmetric"] = {"eta": 0.0}

    # Spectral-flow paths on t = k/16.
    times = [k / 16 for k in range(17)]
    pths = {
        "one_crossing": ([(lambda t: t - 0.45, 1), (lambda t: -2.0, 1)], [(lambda t: 1.0, 1)], ("0", "1/1")),
        "two_branches": ([(lambda t: t - 0.45, 1), (lambda t: 0.45 - t, 1)], [(lambda t: 2.0, 1)], ("1/2", "1/2")),
        "double_rise": ([(lambda t: -1.2 + 1.5 * t, 1), (lambda t: -0.7 + 0.9 * t, 1), (lambda t: -3.0, 2)],
                        [(lambda t: -2.0, 1), (lambda t: 0.8, 1)], ("-1", "1")),
    }
    oracle["paths"] = {}
    for name, (spin, form, (n0, n1)) in pths.items():
        samples = []
        for t in times:
            modes = [(round(f(t), 12), m, "spinor") for f, m in spin] + [(f(t), m, "form") for f, m in form]
            merged = {}
            for v, m, s in modes:
                merged[(v, s)] = merged.get((v, s), 0) + m
            samples.append((t, [(v, m, s) for (v, s), m in merged.items()]))
        write(f"paths/{name}.path", path_text(name, samples))
        start, end = samples[0][1], samples[-1][1]
        lam = min(v for _, ms in samples for v, _, _ in ms) - 1.0
        negs = [abs(v) for ms in (start, end) for v, _, s in ms if s == "spinor" and v < 0]
        eps_default = 0.5 * min(negs)
        oracle["paths"][name] = {
            "sf_eps_0.1": sign_change_sf(spin, times, 0.1),
            "sf_default": sign_change_sf(spin, times, eps_default),
            "default_epsilon": eps_default,
            "lambda": lam,
            "n_lambda_start": n_lambda(start, lam),
            "n_lambda_end": n_lambda(end, lam),
            "n0": n0,
            "n1": n1,
        }
        assert Fraction(n1) - Fraction(n0) == oracle["paths"][name]["sf_eps_0.1"]

    # Lattices.
    def diag(m):
        return [[-1 if i == j else 0 for j in range(m)] for i in range(m)]

    def minus_e8():
        g = [[-2 if i == j else 0 for j in range(8)] for i in range(8)]
        for a, b in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 7)]:
            g[a][b] = g[b][a] = 1
        return g

    def direct_sum(*blocks):
        n = sum(len(b) for b in blocks)
        g = [[0] * n for _ in range(n)]
        o = 0
        for b in blocks:
            for i in range(len(b)):
                for j in range(len(b)):
                    g[o + i][o + j] = b[i][j]
            o += len(b)
        return g

    def gram_text(g, comment):
        return f"# {comment}\n" + "\n".join(" ".join(str(x) for x in row) for row in g) + "\n"

    e8 = minus_e8()
    grams = {"diag3": (diag(3), "<-1>^3"), "minus_e8": (e8, "-E8"),
             "diag3_e8": (direct_sum(diag(3), e8), "<-1>^3 + (-E8)"),
             "diag3_e8x2": (direct_sum(diag(3), e8, e8), "<-1>^3 + (-E8) + (-E8)"),
             "diag2": (diag(2), "<-1>^2")}
    oracle["lattice"] = {}
    for name, (g, comment) in grams.items():
        write(f"lattice/{name}.gram", gram_text(g, comment))
        a = np.array(g, dtype=float)
        oracle["lattice"][name] = {"rank": len(g), "det": int(round(np.linalg.det(a))),
                                   "negative_definite": bool(np.all(np.linalg.eigvalsh(a) < 0))}
    # Exhaustive scan for <-1>^2 over [-3, 3]^2.
    chars = [(x, y) for x in range(-3, 4) for y in range(-3, 4) if x % 2 and y % 2]
    oracle["lattice"]["diag2_bound3"] = {"count": len(chars), "max_c_sq": max(-x * x - y * y for x, y in chars)}

    # Invalid inputs.
    write("invalid/descending.spec", "name bad\nN 1\nmode 1.0 1 form\nmode -1.0 1 spinor\n")
    write("invalid/bad.model", model_text("bad", "descending.spec", -2.0, 2.0, 1.0))

    # Manifests.
    def manifest(name, command, inputs, parameters, seed=0, workers=1):
        m = {"command": command, "inputs": inputs, "parameters": parameters, "output_dir": "swfc-out",
             "seed": seed, "worker_count": workers}
        write(f"manifests/{name}.json", json.dumps(m, indent=2) + "\n")

    manifest("s3_like", "swf", {"model": "../models/s3_like.model"}, {"n_invariant": "0"})
    manifest("gapped", "swf", {"model": "../models/gapped.model"}, {"n_invariant": "0"})
    manifest("gapped_cutoff", "cutoff-compare", {"model": "../models/gapped.model"},
             {"windows": [[-2.0, 2.0], [-2.0, 3.0]], "cubes_per_side": 32, "T": 0.25, "allow_shortcut": False})
    manifest("poincare", "swf", {"model": "../models/poincare_like.model"},
             {"n_invariant": {"eta_dir": -1.5, "k_dirac": 0, "eta_sign": 2.0, "integral": True}})
    manifest("decomposition", "decompose", {"model": "../models/decomposition.model"},
             {"epsilon": 0.05, "cubes_per_side": 96, "T": 0.25})
    manifest("pair_cutoff", "cutoff-compare", {"model": "../models/pair.model"},
             {"windows": [[-1.3, 1.2], [-1.5, 1.35]], "cubes_per_side": 48, "T": 0.25, "allow_shortcut": False})
    manifest("one_crossing", "sflow", {"path": "../paths/one_crossing.path"},
             {"n0": "0", "n1": "1", "epsilon": 0.1})
    manifest("sflow_mismatch", "sflow", {"path": "../paths/one_crossing.path"},
             {"n0": "0", "n1": "0", "epsilon": 0.1})
    manifest("even_summands", "lattice",
             {"J_zero": "../lattice/diag3.gram", "J_minus_e8": "../lattice/diag3_e8.gram",
              "J_minus_e8x2": "../lattice/diag3_e8x2.gram"},
             {"n": "-1", "r_min": 0, "expect": {"J_zero": "pass", "J_minus_e8": "pass", "J_minus_e8x2": "fail"}})
    manifest("double_well", "conley-demo", {}, {"example": "double-well", "cubes_per_side": 64})
    manifest("saddle", "conley-demo", {}, {"example": "saddle", "cubes_per_side": 32})
    manifest("invalid_spectrum", "swf", {"model": "../invalid/bad.model"}, {})

    (out / "oracle" / "values.json").write_text(json.dumps(oracle, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
