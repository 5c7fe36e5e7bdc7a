"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
Expected values come from the oracles in ``oracles.py`` (swap-counting
blade products, reference stencils, closed-form frames) rather than from
the package itself.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from localpauli import algebra as ga
from localpauli.algebra import Signature
from localpauli.exceptions import NotClosed, SingularElement
from localpauli.fields import (
    ConnectionField,
    FrameMatrixField,
    Grid,
    curvature,
    field_equation_residual,
    frame_from_matrix,
    max_commutator,
    mu_coefficient,
    spin_connection_general,
    spin_connection_grade1,
)
from localpauli.pauli import (
    Case,
    GeneratorSet,
    admissible_pseudoscalars,
    intertwiner,
    pseudoscalar_of,
    random_conjugated_set,
)
from localpauli.transport import find_potential, solve_global, solve_ode_line

from helpers import euler_angles, rotor_frame, square_grid
from oracles import all_words, boost2, d4, euler_zyz, observed_order, rotation2, trig_poly, word_product, word_to_mask

# constancy of S^{-1} h^a S: std over nodes <= CONSTANCY_K[method] * dx**order
CONSTANCY_K = {"potential": 5.0, "path_ordered": 2.0}
CONSTANCY_ORDER = {"potential": 4, "path_ordered": 2}

SOLVE_RUNS: dict[str, list] = {}
SUMMARY: list[str] = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    SUMMARY.append(line)
    print("\n" + line)


def record_run(key, result, grid):
    SOLVE_RUNS.setdefault(key, []).append((result, max(grid.spacing)))


def d4_axis(f, axis, step):
    return np.moveaxis(d4(np.moveaxis(f, axis, 0), step), 0, axis)


def stencil_error(Y, dY, grid):
    """Largest error of the fourth-order stencil on the frame matrix entries (interior nodes)."""
    mask = grid.interior_mask(2)
    worst = 0.0
    for mu in range(grid.r):
        approx = d4_axis(Y, mu, grid.spacing[mu])
        worst = max(worst, float(np.max(np.abs(approx - dY[..., mu, :, :])[mask])))
    return worst


def interior_deviation(C, expected, grid):
    return float(np.max(ga.norm_array(C.data - expected).max(axis=-1)[grid.interior_mask(2)]))


def scalar_frame(kind, N, seed):
    """Rotation or boost frame of a random trig polynomial with exact derivatives."""
    grid = square_grid(N)
    x1, x2 = grid.coords()
    f, df = trig_poly(np.random.default_rng(seed))
    phi = f(x1, x2)
    dphi = np.stack(df(x1, x2), axis=-1)
    if kind == "boost":
        Y = boost2(phi)
        dmat = np.stack([np.sinh(phi), np.cosh(phi), np.cosh(phi), np.sinh(phi)], -1)
    else:
        Y = rotation2(phi)
        dmat = np.stack([-np.sin(phi), np.cos(phi), -np.cos(phi), -np.sin(phi)], -1)
    dY = dphi[..., :, None, None] * dmat.reshape(phi.shape + (1, 2, 2))
    return grid, phi, dphi, Y, dY


def e12_expected(grid, coeff):
    out = np.zeros(grid.shape + (grid.r, 4))
    out[..., 3] = coeff
    return out


# ---------------------------------------------------------------------------


def test_criterion_1_example_one_connection():
    sig = Signature(2, 0)
    worst_ratio, worst_time, lines = 0.0, 0.0, []
    for seed in range(5):
        t0 = time.perf_counter()
        grid, phi, dphi, Y, dY = scalar_frame("rotation", 65, seed)
        h = frame_from_matrix(FrameMatrixField(sig, grid, Y))
        C = spin_connection_general(h)
        elapsed = time.perf_counter() - t0
        dev = interior_deviation(C, e12_expected(grid, -dphi / 2), grid)
        est = stencil_error(Y, dY, grid)
        worst_ratio = max(worst_ratio, dev / est)
        worst_time = max(worst_time, elapsed)
        record_run("1", solve_global(h, tol_final=None), grid)
        lines.append(f"{dev:.1e}/{est:.1e}")
    ok = worst_ratio <= 10 and worst_time < 5
    report(1, ok, f"deviation/stencil estimate {', '.join(lines)}; worst ratio {worst_ratio:.2f}; max time {worst_time:.2f}s")
    assert ok


def exact_transport(kind, phi):
    a = (phi - phi[0, 0]) / 2
    S = np.zeros(phi.shape + (4,))
    if kind == "boost":
        S[..., 0], S[..., 3] = np.cosh(a), -np.sinh(a)
    else:
        S[..., 0], S[..., 3] = np.cos(a), np.sin(a)
    return S


def test_criterion_2_examples_two_and_three():
    """Connection sign per signature, and transport against the closed form.

    The transport check uses the same regime as the connection check: the
    deviation from the closed form must stay within 10x an error estimate,
    here the change of ``S`` under one grid refinement.
    """
    lines, ok = [], True
    cases = [("rotation", Signature(0, 2), +1.0), ("boost", Signature(1, 1), -1.0)]
    for kind, sig, sign in cases:
        worst_ratio, worst_transport = 0.0, 0.0
        for seed in range(5):
            S_runs = []
            for N in (65, 129):
                grid, phi, dphi, Y, dY = scalar_frame(kind, N, seed)
                h = frame_from_matrix(FrameMatrixField(sig, grid, Y))
                res = solve_global(h, tol_final=None)
                S_runs.append(res.S.data)
                if N == 65:
                    C = spin_connection_general(h)
                    dev = interior_deviation(C, e12_expected(grid, sign * dphi / 2), grid)
                    worst_ratio = max(worst_ratio, dev / stencil_error(Y, dY, grid))
                    record_run("2", res, grid)
                    err = float(np.max(ga.norm_array(res.S.data - exact_transport(kind, phi))))
            estimate = float(np.max(ga.norm_array(S_runs[0] - S_runs[1][::2, ::2])))
            worst_transport = max(worst_transport, err / estimate)
        ok &= worst_ratio <= 10 and worst_transport <= 10
        lines.append(f"{sig}: connection ratio {worst_ratio:.2f}, {kind} transport ratio {worst_transport:.2f}")
    report(2, ok, "; ".join(lines))
    assert ok


def euler_problem(N, length=2.0):
    sig = Signature(3, 0)
    grid = square_grid(N, length)
    phi, psi, theta, d = euler_angles(grid)
    Y = euler_zyz(phi, psi, theta)
    # exact derivatives of the matrix by the chain rule, angle by angle
    eps = 1e-6
    parts = []
    for mu in range(2):
        dY = np.zeros_like(Y)
        for name, idx in (("phi", 0), ("psi", 1), ("theta", 2)):
            args_p = [phi, psi, theta]
            args_m = [phi, psi, theta]
            args_p[idx] = args_p[idx] + eps
            args_m[idx] = args_m[idx] - eps
            dY = dY + (euler_zyz(*args_p) - euler_zyz(*args_m)) / (2 * eps) * d[name][mu][..., None, None]
        parts.append(dY)
    dY = np.stack(parts, axis=-3)
    h = frame_from_matrix(FrameMatrixField(sig, grid, Y))
    return h, grid, (phi, psi, theta, d), Y, dY


def euler_connection(grid, angles, sign23):
    phi, psi, theta, d = angles
    out = np.zeros(grid.shape + (2, 8))
    for mu in range(2):
        dphi, dpsi, dth = d["phi"][mu], d["psi"][mu], d["theta"][mu]
        out[..., mu, 0b011] = (np.cos(theta) * dphi + dpsi) / 2
        out[..., mu, 0b101] = (-np.sin(psi) * np.sin(theta) * dphi - np.cos(psi) * dth) / 2
        out[..., mu, 0b110] = (sign23 * np.cos(psi) * np.sin(theta) * dphi + np.sin(psi) * dth) / 2
    return out


def test_criterion_3_euler_angles():
    t0 = time.perf_counter()
    h, grid, angles, Y, dY = euler_problem(65)
    C = spin_connection_general(h)
    est = stencil_error(Y, dY, grid)
    displayed = interior_deviation(C, euler_connection(grid, angles, +1.0), grid)
    rederived = interior_deviation(C, euler_connection(grid, angles, -1.0), grid)
    formula_ok = displayed <= 10 * est
    comm = max_commutator(C)
    try:
        find_potential(C)
        not_closed = False
    except NotClosed:
        not_closed = True

    finals, methods = [], set()
    for N in (65, 129, 257):
        hN = h if N == 65 else euler_problem(N)[0]
        res = solve_global(hN, tol_final=None)
        methods.add(res.method)
        finals.append(res.diagnostics["final_residual"])
        record_run("3", res, hN.grid)
    orders = observed_order(finals)
    elapsed = time.perf_counter() - t0
    convergence_ok = methods == {"path_ordered"} and min(orders) >= 1.8 and elapsed < 60
    ok = formula_ok and comm > 1e-3 and not_closed and convergence_ok
    report(
        3,
        ok,
        f"displayed formula deviation {displayed:.2e} vs 10x stencil estimate {10 * est:.2e} "
        f"({'ok' if formula_ok else 'MISMATCH'}; with the e23 dphi term sign flipped: {rederived:.2e}); "
        f"max commutator {comm:.3f}; NotClosed {not_closed}; final residuals "
        f"{', '.join(f'{v:.2e}' for v in finals)} orders {', '.join(f'{o:.2f}' for o in orders)}; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_4_algebraic_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, count, problems = 0.0, 0, []
    for n in range(1, 7):
        for p in range(n + 1):
            for field in ("R", "C"):
                sig = Signature(p, n - p, field)
                std = GeneratorSet.standard(sig)
                allowed = admissible_pseudoscalars(sig) if n % 2 else None
                for _ in range(20):
                    h, P = random_conjugated_set(sig, rng)
                    res = intertwiner(h, std)
                    count += 1
                    worst = max(worst, res.residual)
                    if res.residual >= 1e-9:
                        problems.append(f"{sig} residual {res.residual:.1e}")
                    if n % 2:
                        top = pseudoscalar_of(h).coeffs
                        label = [k for k, v in allowed.items() if np.max(np.abs(v.coeffs - top)) < 1e-8]
                        if not label or res.case is not Case.PLUS:
                            problems.append(f"{sig} case {res.case.value} pseudoscalar {label}")
                    elif res.case is not Case.EVEN:
                        problems.append(f"{sig} case {res.case.value}")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 60
    report(4, ok, f"{count} conjugated sets, worst residual {worst:.1e}, {elapsed:.1f}s; problems: {problems[:3]}")
    assert ok


def mu_from_blades(n, k):
    """``mu_k`` from the defining property: sum_a [X, e^a] e_a = X / mu_k for grade-k X."""
    metric = [1] * n
    A = tuple(range(1, k + 1))
    total = 0
    for a in range(1, n + 1):
        s1, w1 = word_product(A, (a,), metric)
        s1b, w1b = word_product(w1, (a,), metric)
        s2, w2 = word_product((a,), A, metric)
        s2b, w2b = word_product(w2, (a,), metric)
        assert w1b == A and w2b == A
        total += s1 * s1b - s2 * s2b
    return Fraction(1, total)


def test_criterion_5_mu_table_and_grade1_cross_check():
    table_ok = all(
        mu_coefficient(n, k) == mu_from_blades(n, k) == Fraction(1, n - (-1) ** k * (n - 2 * k))
        for n in range(2, 9)
        for k in range(1, 2 * (n // 2) + 1)
    )
    rng = np.random.default_rng(55)
    worst = 0.0
    for sig in (Signature(2, 0), Signature(1, 1), Signature(3, 0), Signature(1, 2), Signature(2, 2),
                Signature(4, 0), Signature(3, 2), Signature(3, 3)):
        grid = square_grid(9, 1.0)
        h, _ = rotor_frame(sig, grid, rng, 0.4)
        a = spin_connection_general(h).data
        b = spin_connection_grade1(h).data
        worst = max(worst, float(np.max(np.abs(a - b))))
    ok = table_ok and worst <= 1e-9
    report(5, ok, f"mu table n=2..8 {'matches' if table_ok else 'MISMATCH'}; general vs grade-1 max difference {worst:.1e}")
    assert ok


CRITERION_6_SIGS = [Signature(2, 0), Signature(1, 1), Signature(0, 2), Signature(3, 0), Signature(2, 1),
                    Signature(1, 2), Signature(4, 0), Signature(2, 2), Signature(3, 1), Signature(1, 3)]


def test_criterion_6_flatness():
    rows, worst_curv, worst_res = [], np.inf, np.inf
    for i, sig in enumerate(CRITERION_6_SIGS):
        curv, resid = [], []
        for N in (33, 65):
            grid = square_grid(N, 1.0)
            h, _ = rotor_frame(sig, grid, np.random.default_rng(600 + i))
            C = spin_connection_general(h)
            curv.append(curvature(C).max_norm(grid.interior_mask(4)))
            resid.append(float(np.max(field_equation_residual(h, C)[grid.interior_mask(2)])))
        record_run("6", solve_global(h, tol_final=None), grid)
        oc, orr = observed_order(curv)[0], observed_order(resid)[0]
        worst_curv, worst_res = min(worst_curv, oc), min(worst_res, orr)
        rows.append(f"{sig.p},{sig.q}:{oc:.2f}/{orr:.2f}")
    ok = worst_curv >= 3.5 and worst_res >= 3.5
    report(6, ok, f"curvature/residual orders {' '.join(rows)}; worst {worst_curv:.2f}/{worst_res:.2f}")
    assert ok


def smooth_line(sig, rng, commuting):
    """Random smooth C_1(x) on x in [0, 2] and, if commuting, its exact transport."""
    if commuting:
        A = ga.random_multivector(sig, rng, 0.4).coeffs
        a, k, ph = rng.normal(size=3)

        def C(x):
            return (1 + a * np.sin(k * x + ph))[:, None] * A

        def F(x):
            return x + a * (np.cos(ph) - np.cos(k * x + ph)) / k if k != 0 else x

        return C, (lambda x: ga.exp_array(F(x)[:, None] * A, sig))
    amp = rng.normal(size=sig.dim) * 0.4
    k = rng.uniform(0.5, 3.0, size=sig.dim)
    ph = rng.uniform(0, 2 * np.pi, size=sig.dim)

    def C(x):
        return amp * np.sin(np.outer(x, k) + ph)

    return C, None


def solve_line(sig, C, N):
    grid = Grid((N,), (0.0,), (2.0 / (N - 1),))
    x = grid.axis_coords(0)
    return solve_ode_line(ConnectionField(sig, grid, C(x)[:, None, :])).data, x


def test_criterion_7_line_integration():
    sig = Signature(3, 0)
    rng = np.random.default_rng(77)
    richardson, exact_orders, exact_err = [], [], 0.0
    for _ in range(5):
        C, _ = smooth_line(sig, rng, False)
        S = [solve_line(sig, C, N)[0] for N in (41, 81, 161, 321)]
        diffs = [float(np.max(np.abs(S[i] - S[i + 1][::2]))) for i in range(3)]
        richardson.append(min(observed_order(diffs)))
    for _ in range(5):
        C, exact = smooth_line(sig, rng, True)
        errs = []
        for N in (41, 81, 161):
            S, x = solve_line(sig, C, N)
            errs.append(float(np.max(np.abs(S - exact(x)))))
        exact_orders.append(min(observed_order(errs)))
        exact_err = max(exact_err, errs[-1])
    ok = min(richardson) >= 3.5 and min(exact_orders) >= 3.5
    report(
        7,
        ok,
        f"Richardson orders {', '.join(f'{o:.2f}' for o in richardson)}; commuting case orders "
        f"{', '.join(f'{o:.2f}' for o in exact_orders)} (finest error {exact_err:.1e})",
    )
    assert ok


def test_criterion_8_constancy_and_uniqueness():
    missing = [k for k in ("1", "2", "3", "6") if k not in SOLVE_RUNS]
    if missing:
        pytest.fail(f"needs the solve runs of criteria {missing}; run the whole file")
    rows, const_ok, measured = [], True, {}
    for key, runs in SOLVE_RUNS.items():
        worst = 0.0
        for res, dx in runs:
            m = res.method
            scaled = res.diagnostics["constancy_std"] / dx ** CONSTANCY_ORDER[m]
            measured[m] = max(measured.get(m, 0.0), scaled)
            worst = max(worst, scaled / CONSTANCY_K[m])
        const_ok &= worst <= 1
        rows.append(f"({key}) worst std/tol {worst:.2f}")
    rows.append("measured constants " + ", ".join(f"{m} {v:.3g}" for m, v in sorted(measured.items())))

    # a unit-norm non-central shift of C must raise the field-equation residual
    rng = np.random.default_rng(88)
    increased = 0
    for trial in range(100):
        sig = CRITERION_6_SIGS[trial % len(CRITERION_6_SIGS)]
        grid = square_grid(33, 1.0)
        h, _ = rotor_frame(sig, grid, rng)
        C = spin_connection_general(h)
        base = field_equation_residual(h, C)
        delta = ga.random_multivector(sig, rng).coeffs.copy()
        delta[ga.center_mask(sig)] = 0
        delta /= np.linalg.norm(delta)
        perturbed = field_equation_residual(h, C.with_data(C.data + delta))
        increased += bool(np.max(perturbed) > np.max(base))
    ok = const_ok and increased == 100
    report(8, ok, f"constancy {'; '.join(rows)}; perturbation increased residual in {increased}/100 trials")
    assert ok


def generator_action(words, gen, metric, left):
    """Signed permutation of blade coefficients for ``e^g x`` (left) or ``x e^g``."""
    perm, sign = [], []
    for w in words:
        s, out = word_product(gen, w, metric) if left else word_product(w, gen, metric)
        perm.append(word_to_mask(out))
        sign.append(s)
    return np.array(perm), np.array(sign)


def test_criterion_9_core_algebra_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    problems = []
    inverse_bad, inverse_rel = 0, 0.0
    M = 1000
    for n in range(1, 7):
        for p in range(n + 1):
            for field in ("R", "C"):
                sig = Signature(p, n - p, field)
                metric = [1] * p + [-1] * (n - p)

                def draw():
                    x = rng.standard_normal((M, sig.dim))
                    return x + 1j * rng.standard_normal((M, sig.dim)) if sig.is_complex else x

                a, b, c = draw(), draw(), draw()
                na, nb, nc = (ga.norm_array(v) for v in (a, b, c))
                ab = ga.gp_array(a, b, sig)
                assoc = ga.norm_array(ga.gp_array(ab, c, sig) - ga.gp_array(a, ga.gp_array(b, c, sig), sig))
                if np.any(assoc > 1e-12 * na * nb * nc):
                    problems.append(f"{sig} associativity {np.max(assoc / (na * nb * nc)):.1e}")
                words = sorted(all_words(n), key=word_to_mask)
                rev_sign = np.array([word_product(tuple(reversed(w)), (), metric)[0] for w in words])
                sq_sign = np.array([word_product(w, w, metric)[0] for w in words])
                rev = ga.reverse_array(a, sig)
                if not np.array_equal(rev, a * rev_sign) or not np.array_equal(ga.reverse_array(rev, sig), a):
                    problems.append(f"{sig} reverse")
                dag = ga.hermitian_array(a, sig)
                if not np.array_equal(dag, np.conj(a) * sq_sign) or not np.array_equal(ga.hermitian_array(dag, sig), a):
                    problems.append(f"{sig} dagger")
                anti = ga.norm_array(
                    ga.hermitian_array(ab, sig) - ga.gp_array(ga.hermitian_array(b, sig), dag, sig)
                )
                if np.any(anti > 1e-12 * na * nb):
                    problems.append(f"{sig} dagger of product")
                # |a|^2 = Tr(a^dagger a) = scalar part, against the coefficient sum
                tr = ga.gp_array(dag, a, sig)[:, 0]
                squares = np.sum(np.abs(a) ** 2, axis=1)
                if np.any(np.abs(tr - squares) > 1e-12 * squares) or np.any(np.abs(na**2 - squares) > 1e-12 * squares):
                    problems.append(f"{sig} norm")
                try:
                    inv = ga.inverse_array(a, sig)
                    e = np.zeros(sig.dim)
                    e[0] = 1
                    two_sided = np.maximum(
                        ga.norm_array(ga.gp_array(inv, a, sig) - e), ga.norm_array(ga.gp_array(a, inv, sig) - e)
                    )
                    inverse_bad += int(np.sum(two_sided > 1e-10))
                    inverse_rel = max(inverse_rel, float(np.max(two_sided / (na * ga.norm_array(inv)))))
                    if np.max(two_sided) > 1e-10:
                        problems.append(f"{sig} inverse {np.max(two_sided):.1e}")
                except SingularElement:
                    pass
                small = a / na[:, None]
                prod = ga.gp_array(ga.exp_array(small, sig), ga.exp_array(-small, sig), sig)
                prod[:, 0] -= 1
                if np.max(ga.norm_array(prod)) > 1e-10:
                    problems.append(f"{sig} exp {np.max(ga.norm_array(prod)):.1e}")
                # center: commuting with all generators iff central grades only
                central = a * ga.center_mask(sig)
                noncentral = a - central
                worst_central, worst = 0.0, np.zeros(M)
                for g in range(1, n + 1):
                    perm_l, sign_l = generator_action(words, (g,), metric, left=True)
                    perm_r, sign_r = generator_action(words, (g,), metric, left=False)

                    def bracket(x):
                        out = np.zeros_like(x)
                        out[:, perm_l] += sign_l * x
                        out[:, perm_r] -= sign_r * x
                        return out

                    worst_central = max(worst_central, float(np.max(np.abs(bracket(central)))))
                    worst = np.maximum(worst, ga.norm_array(bracket(noncentral)))
                if worst_central > 1e-12 * np.max(na):
                    problems.append(f"{sig} center")
                if np.any((worst == 0) & (ga.norm_array(noncentral) > 0)):
                    problems.append(f"{sig} non-central element commutes")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 30
    report(
        9,
        ok,
        f"54 signatures x {M} samples in {elapsed:.1f}s; inverse residual > 1e-10 for {inverse_bad} samples "
        f"(largest residual / (|a| |a^-1|) = {inverse_rel:.1e}); problems: {problems[:4]}",
    )
    assert ok
