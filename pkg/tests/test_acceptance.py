"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -s``; the lines are also
collected into the terminal summary of any pytest run.
"""

import itertools
import math
import time

import numpy as np
import pytest

from z2higgs.analytics import (
    QuenchParams,
    bending_frequency,
    commutator_error_terms,
    glassy_amplitude,
    period,
    trotter_error_bound,
    trotter_error_terms_from_counts,
)
from z2higgs.compiler import Gate, insert_gdd, mirror_calibration, n_layers, trotter_circuit, twirl
from z2higgs.correction import (
    apply_correction,
    brute_force_min_weight,
    code_distance,
    compute_syndrome,
    decode,
    qubit_syndrome_masks,
)
from z2higgs.experiments import ExperimentConfig, Toggles, run_quench
from z2higgs.lattice import build_brick, build_chain, build_flake, build_ladder
from z2higgs.mitigation import bootstrap, odr_estimate
from z2higgs.model import (
    build_hamiltonian,
    exact_diagonal_series,
    exact_evolve,
    gap_physical_sector,
    prepare_string_state,
    syndromes,
)
from z2higgs.pauli import PauliString
from z2higgs.simulator import (
    NoiseModel,
    apply_circuit,
    apply_gate,
    exact_channel_expectation,
    layer_snapshots,
    run_trajectories,
)

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print("\n" + line)
    assert ok, line


def z_values(state, qubits) -> np.ndarray:
    p = state.probabilities()
    idx = np.arange(p.shape[0])
    return np.array([p @ (1 - 2 * ((idx >> q) & 1)) for q in qubits])


def test_c01_glassy_dynamics(flake0):
    t0 = time.perf_counter()
    dt, every = 0.05, 2
    circ = trotter_circuit(flake0, QuenchParams(0.0, 0.0, 1.0, 6.0, dt))
    snaps = layer_snapshots(None, circ, every=every)
    step = every * circ.metadata["dt_tilde"]
    qs = flake0.matter_qubits
    dev = 0.0
    for k, s in enumerate(snaps):
        t = k * step
        ref = np.array([glassy_amplitude(0.0, 1.0, t) ** flake0.degree(n) for n in flake0.nodes])
        dev = max(dev, float(np.abs(z_values(s, qs) - ref).max()))
    elapsed = time.perf_counter() - t0
    report(1, dev <= 0.02 and elapsed < 30, f"max|dev|={dev:.2e} over {len(snaps)} times, {elapsed:.1f}s")


def test_c02_gap_formula(flake0):
    t0 = time.perf_counter()
    grid = np.linspace(0.6, 3.0, 5)
    worst = 0.0
    for g, lam in itertools.product(grid, grid):
        gap = gap_physical_sector(build_hamiltonian(flake0, 0.0, g, lam))
        worst = max(worst, abs(gap - 2 * math.hypot(g, lam)))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 1e-8 and elapsed < 60, f"max|gap-2sqrt(g^2+lam^2)|={worst:.1e}, {elapsed:.1f}s")


def test_c03_yoyo_period(ladder):
    m, g, lam = 5.0, 2.0, 1.0
    init = prepare_string_state(ladder, [2, 5])
    H = build_hamiltonian(ladder, m, g, lam)
    Zend = PauliString.single("Z", ladder.qubit_of_node(2))
    ts = np.arange(0, 60.0, 0.05)
    occ = (1 - exact_diagonal_series(init.to_state(), H, ts, [Zend])[:, 0]) / 2
    x = (occ - occ.mean()) * np.hanning(len(occ))
    nfft = 16 * len(x)
    spec = np.abs(np.fft.rfft(x, nfft))
    omega = 2 * np.pi * np.fft.rfftfreq(nfft, d=0.05)
    # the slow bending drift sits far below the yo-yo band
    band = omega >= g
    peak = float(omega[band][np.argmax(spec[band])])
    overall = float(omega[np.argmax(spec)])

    every, dt = 2, 0.15
    circ = trotter_circuit(ladder, QuenchParams(m, g, lam, 3.0, dt), initial=init.index)
    snaps = layer_snapshots(None, circ, every=every)
    tt = [k * every * circ.metadata["dt_tilde"] for k in range(len(snaps))]
    ex = exact_diagonal_series(init.to_state(), H, tt, [Zend])[:, 0]
    tr = np.array([z_values(s, [ladder.qubit_of_node(2)])[0] for s in snaps])
    dev = np.abs(tr - ex) / 2
    agree = float(dev.max())
    first = next((t for t, d in zip(tt, dev) if d > 0.03), None)
    ok = abs(peak - 4.0) <= 0.2 and agree <= 0.03
    where = "" if first is None else f", first above 0.03 at t={first:.2f}"
    report(3, ok, f"peak(omega>=g)={peak:.3f} (unrestricted {overall:.3f}), trotter-exact max={agree:.3f} on [0, 3]{where}")


def test_c04_bending_formula():
    w = bending_frequency(5, 2, 1)
    T = period(w)
    report(4, w == 5 / 12 and round(T, 2) == 15.08, f"omega_b={w!r}, T_b={T:.4f}")


def test_c05_code_distance(flake0):
    t0 = time.perf_counter()
    d = code_distance(flake0)
    base = np.array(prepare_string_state(flake0, list(flake0.edges[0])).bits, dtype=np.uint8)
    reverted = 0
    for q in range(flake0.n_qubits):
        noisy = base.copy()
        noisy[q] ^= 1
        corr = decode(compute_syndrome(noisy, flake0), flake0)
        reverted += np.array_equal(apply_correction(noisy, corr, flake0), base)
    best = brute_force_min_weight(flake0)
    masks = qubit_syndrome_masks(flake0)
    optimal = total = 0
    for w in (1, 2):
        for qs in itertools.combinations(range(flake0.n_qubits), w):
            noisy = base.copy()
            key = 0
            for q in qs:
                noisy[q] ^= 1
                key ^= masks[q]
            optimal += decode(compute_syndrome(noisy, flake0), flake0).weight == best[key]
            total += 1
    elapsed = time.perf_counter() - t0
    ok = d == 3 and reverted == flake0.n_qubits == 12 and optimal == total and elapsed < 60
    report(5, ok, f"d={int(d)}, reverted {reverted}/12, optimal {optimal}/{total}, {elapsed:.1f}s")


def _run_with_kick(circ, psi0, qubit, after_layer):
    psi = psi0.copy()
    gates = circ.gates
    kick = Gate("rx", (qubit,), math.pi / 2)
    for i, g in enumerate(gates):
        apply_gate(psi, g)
        if g.layer == after_layer and (i + 1 == len(gates) or gates[i + 1].layer != g.layer):
            apply_gate(psi, kick)
    return psi


def test_c06_gdd(flake0):
    n = flake0.n_qubits
    base = trotter_circuit(flake0, QuenchParams(1.0, 0.5, 1.0, 1.0, 0.25))
    rng = np.random.default_rng(0)
    phys = np.nonzero(syndromes(flake0, np.arange(1 << n)) == 0)[0]
    psi0 = np.zeros(1 << n, dtype=complex)
    psi0[phys] = rng.normal(size=phys.size) + 1j * rng.normal(size=phys.size)
    psi0 /= np.linalg.norm(psi0)
    ref = apply_circuit(psi0, base)
    fid_err = max(abs(1 - ref.fidelity(apply_circuit(psi0, insert_gdd(base, s)))) for s in range(20))

    start = np.zeros(1 << n, dtype=complex)
    start[prepare_string_state(flake0, list(flake0.edges[0])).index] = 1.0
    q = flake0.qubit_of_node(0)
    P = np.zeros(1 << n, dtype=bool)
    P[phys] = True
    one = _run_with_kick(base, start, q, 0)
    unavg = np.linalg.norm(one[P]) * np.linalg.norm(one[~P])
    K = 1000
    A = np.empty((P.sum(), K), dtype=complex)
    B = np.empty(((~P).sum(), K), dtype=complex)
    for s in range(K):
        v = _run_with_kick(insert_gdd(base, s), start, q, 0)
        A[:, s], B[:, s] = v[P], v[~P]
    # ||P rho Q||_F^2 = tr(A^H A  B^H B) / K^2 without forming rho
    avg = math.sqrt(max(0.0, float(np.real(np.sum((A.conj().T @ A) * (B.conj().T @ B).T))))) / K
    ratio = avg / unavg
    ok = fid_err <= 1e-12 and ratio < 0.05
    report(6, ok, f"|1-F|={fid_err:.1e}, off-diagonal norm {avg:.4f} vs {unavg:.4f} (ratio {ratio:.3f}) over {K} seeds")


def test_c07_odr_exactness(square_tail):
    lat = square_tail
    assert lat.n_qubits == 10
    init = prepare_string_state(lat, [0, 1, 3]).index
    circ = trotter_circuit(lat, QuenchParams(1.0, 0.5, 1.0, 1.0, 0.25), initial=init)
    cal = mirror_calibration(circ)
    terminal = tuple((0.01, PauliString.single(c, q)) for q in range(10) for c in "XY")
    terminal += ((0.02, PauliString.from_letters({0: "X", 3: "X"})), (0.01, PauliString.from_letters({5: "Y", 9: "X"})))
    noise = NoiseModel(p_meas=0.02, terminal=terminal)
    obs = [PauliString.single("Z", q) for q in range(10)]
    obs += [PauliString.from_letters({a: "Z", b: "Z"}) for a, b in ((0, 1), (2, 7), (4, 9))]
    ideal = np.array([1 - 2 * (bin(init & sum(1 << q for q in o.support)).count("1") & 1) for o in obs], dtype=float)
    clean = np.asarray(exact_channel_expectation(circ, None, obs))
    noisy = np.asarray(exact_channel_expectation(circ, noise, obs))
    cal_noisy = np.asarray(exact_channel_expectation(cal, noise, obs))
    oracle_err = float(np.abs(noisy * ideal / cal_noisy - clean).max())

    shots = 100_000
    sim = run_trajectories(circ, noise, shots, master_seed=11)
    calt = run_trajectories(cal, noise, shots, master_seed=12)
    worst = 0.0
    for j, o in enumerate(obs):
        est = odr_estimate(sim.parities(o)[:, None], np.array([1.0]), calt.parities(o)[:, None], np.array([ideal[j]]), seed=j)
        worst = max(worst, abs(est.mean - clean[j]) / est.se)
    ok = oracle_err <= 1e-10 and worst <= 3
    report(7, ok, f"oracle max err={oracle_err:.1e}, sampling worst |dev|/se={worst:.2f} at {shots} shots")


def test_c08_trotter_bound(flake0):
    psi = prepare_string_state(flake0, list(flake0.edges[0])).to_state()
    t = 2.0
    violations, rows = 0, 0
    for m, g, dt in itertools.product((0.0, 1.0, 3.0), (0.0, 0.5, 2.0), (0.05, 0.1, 0.25)):
        circ = trotter_circuit(flake0, QuenchParams(m, g, 1.0, t, dt))
        err = np.linalg.norm(apply_circuit(psi, circ).amplitudes - exact_evolve(psi, build_hamiltonian(flake0, m, g, 1.0), t).amplitudes)
        violations += err > trotter_error_bound(flake0, m, g, 1.0, t, dt) + 1e-10
        rows += 1
    zero = trotter_error_bound(flake0, 0.0, 0.0, 1.0, t, 0.1)
    mismatch = 0
    for lat in (flake0, build_flake(1), build_brick(2, 2)):
        for m, g, lam in ((1.0, 1.0, 1.0), (2.0, -0.5, 0.7), (5.0, 2.0, 1.0)):
            sym = commutator_error_terms(lat, m, g, lam, 4.0, 0.15)
            hand = trotter_error_terms_from_counts(lat.n_edges, lat.count_degree(2), lat.count_degree(3), m, g, lam, 4.0, 0.15)
            mismatch += set(sym) != set(hand) or any(abs(sym[k] - hand[k]) > 1e-12 * max(1.0, abs(hand[k])) for k in hand)
    ok = violations == 0 and zero == 0 and mismatch == 0
    report(8, ok, f"bound violations {violations}/{rows}, bound(m=g=0)={zero}, term mismatches {mismatch}")


def test_c09_depth_accounting(flake0, ladder, chain4):
    lats = (flake0, ladder, chain4, build_brick(2, 2), build_flake(1))
    bad, count = [], 0
    for lat, (t, dt) in itertools.product(lats, ((0.3, 0.25), (1.0, 0.25), (2.0, 0.15), (0.7, 0.1), (4.0, 0.3))):
        base = trotter_circuit(lat, QuenchParams(1.0, 0.5, 1.0, t, dt))
        for circ in (base, insert_gdd(base, 1), twirl(base, 2), twirl(insert_gdd(base, 3), 4)):
            count += 1
            L = circ.metadata["L"]
            checks = (
                L == n_layers(t, dt) and L % 2 == 0,
                abs(circ.metadata["dt_tilde"] * L - t) <= 1e-12,
                circ.layer_two_qubit_depths() == [6] * L,
                circ.two_qubit_depth() == 6 * L,
                circ.cnot_count == 4 * lat.n_edges * L,
                circ.metadata["gauge_slot_depth"] == 6 * lat.n_edges * L,
            )
            if not all(checks):
                bad.append((lat.kind, t, dt))
    report(9, not bad, f"{count - len(bad)}/{count} circuits satisfy the depth accounting")


def test_c10_bootstrap_coverage():
    rng = np.random.default_rng(2024)
    p, N, reps = 0.3, 10_000, 500
    hits = 0
    for _ in range(reps):
        x = (rng.random(N) < p).astype(float)
        est = bootstrap(x, B=1000, level=0.70, seed=rng)
        hits += est.ci_low <= p <= est.ci_high
    cov = hits / reps
    report(10, abs(cov - 0.70) <= 0.03, f"coverage {cov:.3f} over {reps} repetitions at N={N}")


PROGRESSION = (
    ("none", Toggles()),
    ("+PT", Toggles(twirl=True)),
    ("+GDD", Toggles(twirl=True, gdd=True)),
    ("+GSC", Toggles(twirl=True, gdd=True, gsc=True)),
    ("+ODR", Toggles(twirl=True, gdd=True, gsc=True, odr=True)),
)


def test_c11_pipeline_progression(flake0):
    times = (1.0, 2.0, 3.0)
    noise = NoiseModel(p1=0.001, p2=0.01, p_meas=0.02, coherent_zz=0.08)
    ref = {f"occupation:{n}": np.array([(1 - glassy_amplitude(0.0, 1.0, t) ** flake0.degree(n)) / 2 for t in times]) for n in flake0.nodes}
    table = []
    for seed in range(3):
        row = []
        for _, tog in PROGRESSION:
            cfg = ExperimentConfig(
                lattice={"kind": "flake", "R": 0}, m=0.0, g=0.0, lam=1.0, dt=0.25, times=times,
                noise=noise, shots=1000, seed=seed, toggles=tog, n_twirls=8, bootstrap_B=200,
            )
            ts = run_quench(cfg, flake0)
            row.append(float(np.mean([np.abs(ts.means(o) - ref[o]).mean() for o in ts.observables])))
        table.append(row)
    monotone = all(all(b <= a + 1e-12 for a, b in zip(r, r[1:])) for r in table)
    summary = "; ".join(f"seed {s}: " + " ".join(f"{v:.3f}" for v in r) for s, r in enumerate(table))
    report(11, monotone, f"MAD {'/'.join(k for k, _ in PROGRESSION)} | {summary}")


def test_c12_calibration_ordering():
    base = dict(
        lattice={"kind": "chain", "n_sites": 4}, m=1.0, g=0.5, lam=1.0, dt=0.25, times=(3.0,),
        initial=((1, 2),), bootstrap_B=200,
    )
    exact = run_quench(ExperimentConfig(**base, exact=True)).matrix()[0]
    noise = NoiseModel(p1=5e-4, p2=5e-3, p_meas=0.02, coherent_zz=0.08)
    wins, errs = 0, []
    for seed in range(5):
        e = {}
        for cal in ("mirror", "clifford"):
            cfg = ExperimentConfig(
                **base, noise=noise, shots=4000, seed=seed, n_twirls=32, calibration=cal,
                toggles=Toggles(twirl=True, gdd=True, odr=True),
            )
            e[cal] = float(np.abs(run_quench(cfg).matrix()[0] - exact).mean())
        wins += e["mirror"] <= e["clifford"]
        errs.append(f"{e['mirror']:.3f}/{e['clifford']:.3f}")
    report(12, wins >= 4, f"mirror <= clifford in {wins}/5 seeds (mirror/clifford: {', '.join(errs)})")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-v"]))
