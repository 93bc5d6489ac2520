"""Declarative experiment runners binding the algebra, polynomial, sampler
and kernel layers, with machine-readable reports.

Every runner consumes an ExperimentConfig and produces a Report whose JSON
form is byte-stable for a fixed seed and worker count (wall time excepted):
estimates are reduced deterministically and all dictionaries are emitted in
a fixed key order.  Every check record carries its estimate, standard error
and threshold; a bare boolean never appears without its numbers.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import algebra as la
from . import estimators as est
from . import kernel as hk
from . import poly as hp
from .rng import Stream
from .sampling import SampleBatch, SamplerConfig, dilate_batch, sample_heat_kernel, \
    sample_heat_kernel_coupled, save_batch


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = ""
    group: str = "heisenberg:1"
    a: float = 1.0
    p: float = 4.0
    q: float = 2.0
    c: float | None = None
    c_from_probe: bool = False
    beta: float = 0.0
    t_grid: tuple[float, ...] = tuple(0.25 * k for k in range(9))
    n: int = 1_000_000
    steps: int = 256
    seed: int = 0
    tol: float | None = None
    out: str | None = None
    workers: int = 1
    family_size: int = 20
    degree: int = 3
    f_text: str | None = None
    ip: str | None = None
    bandwidth: float = 0.05

    def __post_init__(self):
        if self.a <= 0:
            raise la.StructuralError("a must be positive")
        if not (0 < self.q <= self.p):
            raise la.StructuralError("need 0 < q <= p")
        if self.beta < 0:
            raise la.StructuralError("beta must be nonnegative")
        if self.c is not None and self.c <= 0:
            raise la.StructuralError("c must be positive")
        if list(self.t_grid) != sorted(self.t_grid):
            raise la.StructuralError("t-grid must be sorted ascending")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["t_grid"] = list(self.t_grid)
        return d


@dataclass(frozen=True)
class CheckRecord:
    name: str
    estimate: float
    stderr: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "estimate": float(self.estimate),
            "stderr": float(self.stderr),
            "threshold": float(self.threshold),
            "pass": bool(self.passed),
        }


@dataclass
class Report:
    experiment: str
    config: dict
    seed: int
    checks: list[CheckRecord]
    walltime_s: float = 0.0

    @property
    def verdict(self) -> str:
        return "pass" if all(c.passed for c in self.checks) else "fail"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "checks": [c.to_dict() for c in self.checks],
            "verdict": self.verdict,
            "walltime_s": self.walltime_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        lines = ["experiment,name,estimate,stderr,threshold,pass"]
        for c in self.checks:
            lines.append(
                f"{self.experiment},{c.name},{c.estimate!r},{c.stderr!r},"
                f"{c.threshold!r},{str(c.passed).lower()}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
        csv_path = str(path)
        csv_path = csv_path[:-5] + ".csv" if csv_path.endswith(".json") else csv_path + ".csv"
        with open(csv_path, "w") as fh:
            fh.write(self.to_csv())


def _finish(report: Report, t0: float, cfg: ExperimentConfig) -> Report:
    report.walltime_s = time.time() - t0
    if cfg.out:
        report.write(cfg.out)
    return report


def _kernel_cfg(cfg: ExperimentConfig) -> hk.KernelQuadratureConfig:
    if cfg.tol is None:
        return hk.DEFAULT_CONFIG
    return hk.KernelQuadratureConfig(abs_tol=cfg.tol)


def _family(alg, cfg: ExperimentConfig, tag: str, count: int, offset: int = 0):
    """Seeded polynomial family; seeds are derived, not sequential, so probe
    and held-out families never overlap."""
    base = Stream("family", tag, cfg.seed).integers(0, 2**31, size=count + offset)
    return [hp.random_poly(alg, cfg.degree, int(s)) for s in base[offset:]]


# ---------------------------------------------------------------------------
# validate


def run_validate(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    diags = la.validate_algebra(alg)
    checks = []
    by_law: dict[str, int] = {}
    for d in diags:
        by_law[d.law] = by_law.get(d.law, 0) + 1
    for law in ("antisymmetry", "jacobi", "grading", "stratification"):
        count = by_law.get(law, 0)
        checks.append(CheckRecord(f"law-{law}", float(count), 0.0, 0.0, count == 0))
    if cfg.ip is not None:
        gram = None
        if cfg.ip != "euclidean":
            gram = np.asarray(json.loads(open(cfg.ip).read()), dtype=float)
        result = la.h_type_check(alg, gram)
        checks.append(
            CheckRecord("h-type", float(len(result.violations)), 0.0, 0.0, result.passed)
        )
    report = Report("validate", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


# ---------------------------------------------------------------------------
# sample


def run_sample(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    batch = sample_heat_kernel(
        alg, SamplerConfig(s=cfg.a, n=cfg.n, steps=cfg.steps, seed=cfg.seed),
        workers=cfg.workers,
    )
    checks = []
    mean_h = est.mc_integral(lambda pts: pts[:, 0], batch)
    checks.append(
        CheckRecord(
            "first-layer-mean", abs(mean_h.mean), mean_h.stderr,
            3.0 * mean_h.stderr, abs(mean_h.mean) <= 3.0 * mean_h.stderr,
        )
    )
    if cfg.out:
        save_batch(batch, cfg.out + ".hclb")
    report = Report("sample", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


# ---------------------------------------------------------------------------
# identities


class _PairValues:
    """Shared pointwise arrays for one (f, g) pair over a coupled batch set."""

    def __init__(self, f, g, fine: SampleBatch, coarse: SampleBatch,
                 dil_plus: SampleBatch, dil_minus: SampleBatch):
        self.f, self.g = f, g
        zf, zg = hp.euler_Z(f), hp.euler_Z(g)
        self.vals = {}
        for name, batch in (("fine", fine), ("coarse", coarse)):
            pts = batch.points
            self.vals[name] = {
                "f": hp.evaluate(f, pts),
                "g": hp.evaluate(g, pts),
                "zf": hp.evaluate(zf, pts),
                "zg": hp.evaluate(zg, pts),
                "hp": hp.h_pairing(f, g, pts),
            }
        self.fg_plus = hp.evaluate(f, dil_plus.points) * np.conj(hp.evaluate(g, dil_plus.points))
        self.fg_minus = hp.evaluate(f, dil_minus.points) * np.conj(hp.evaluate(g, dil_minus.points))

    def sym_defect(self, which: str) -> np.ndarray:
        v = self.vals[which]
        return v["zf"] * np.conj(v["g"]) - v["f"] * np.conj(v["zg"])

    def x_of_product(self, which: str) -> np.ndarray:
        v = self.vals[which]
        return v["zf"] * np.conj(v["g"]) + v["f"] * np.conj(v["zg"])

    def pairing(self, which: str) -> np.ndarray:
        return self.vals[which]["hp"]


def _abs_check(name: str, estimate: est.MCEstimate, sigmas: float = 3.0,
               floor: float = 0.0) -> CheckRecord:
    mag = abs(estimate.mean)
    threshold = max(sigmas * estimate.stderr, floor)
    return CheckRecord(name, mag, estimate.stderr, threshold, mag <= threshold)


def run_identities(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    a = cfg.a
    fine, coarse = sample_heat_kernel_coupled(
        alg, SamplerConfig(s=a, n=cfg.n, steps=cfg.steps, seed=cfg.seed),
        workers=cfg.workers,
    )
    eta = 0.01
    dil_plus = dilate_batch(fine, math.sqrt(1.0 + eta))
    dil_minus = dilate_batch(fine, math.sqrt(1.0 - eta))

    fams = _family(alg, cfg, "identities", 2 * cfg.family_size)
    checks: list[CheckRecord] = []
    for i in range(cfg.family_size):
        f, g = fams[2 * i], fams[2 * i + 1]
        pv = _PairValues(f, g, fine, coarse, dil_plus, dil_minus)

        # (i) symmetry of the dilation generator in the L2 pairing
        sym = est.mc_integral(pv.sym_defect("fine"), fine)
        checks.append(_abs_check(f"z-symmetry-{i}", sym))

        # (ii) energy pairing equals (2/a) <Zf, g>; two-level estimator
        # cancels the O(1/steps) law bias which is comparable to 3 sigma
        # at this sample count
        defect_fine = pv.pairing("fine") - (2.0 / a) * pv.vals["fine"]["zf"] * np.conj(pv.vals["fine"]["g"])
        defect_coarse = pv.pairing("coarse") - (2.0 / a) * pv.vals["coarse"]["zf"] * np.conj(pv.vals["coarse"]["g"])
        zb = est.mc_integral(2.0 * defect_fine - defect_coarse, fine)
        checks.append(_abs_check(f"zb-pairing-{i}", zb))

        # (iii) the rotation field integrates to zero
        y_vals = 1j * pv.sym_defect("fine")
        checks.append(_abs_check(f"y-integral-{i}", est.mc_integral(y_vals, fine)))

        # (iv) s-derivative of the pair integral vs Laplacian and Euler forms
        deriv = (pv.fg_plus - pv.fg_minus) / (2.0 * a * eta)
        lap_side = 0.5 * pv.pairing("fine")
        x_side = pv.x_of_product("fine") / (2.0 * a)
        lap_mean = est.mc_integral(lap_side, fine)
        d_vs_lap = est.mc_integral(deriv - lap_side, fine)
        checks.append(
            _abs_check(f"ds-laplacian-{i}", d_vs_lap, floor=0.01 * abs(lap_mean.mean))
        )
        x_mean = est.mc_integral(x_side, fine)
        d_vs_x = est.mc_integral(deriv - x_side, fine)
        checks.append(
            _abs_check(f"ds-euler-{i}", d_vs_x, floor=0.01 * abs(x_mean.mean))
        )

    # orthogonality of distinct homogeneous degrees
    stream = Stream("ortho", cfg.seed)
    made = 0
    while made < 10:
        dj, dk = stream.integers(0, 5, size=2)
        if dj == dk:
            continue
        fj = hp.random_homogeneous(alg, int(dj), int(stream.integers(0, 2**31)[0]))
        fk = hp.random_homogeneous(alg, int(dk), int(stream.integers(0, 2**31)[0]))
        ip = est.inner_product(fj, fk, fine)
        checks.append(_abs_check(f"orthogonality-{made}", ip))
        made += 1

    report = Report("identities", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


# ---------------------------------------------------------------------------
# contractivity


def _norm_increment(f, p: float, lam_from: float, lam_to: float,
                    batch: SampleBatch) -> est.MCEstimate:
    """||f o delta_to||_p - ||f o delta_from||_p with correlated errors."""
    pts = batch.points
    va = np.abs(hp.evaluate(hp.dilate_pullback(f, lam_from), pts)) ** p
    vb = np.abs(hp.evaluate(hp.dilate_pullback(f, lam_to), pts)) ** p
    ma = est._det_sum(va) / batch.n
    mb = est._det_sum(vb) / batch.n
    if ma <= 0 or mb <= 0:
        return est.MCEstimate(mb ** (1.0 / p) - ma ** (1.0 / p), 0.0, batch.n)
    diff = mb ** (1.0 / p) - ma ** (1.0 / p)
    grad = np.array([-(ma ** (1.0 / p)) / (p * ma), (mb ** (1.0 / p)) / (p * mb)])
    cov = np.cov(np.stack([va, vb]), ddof=1)
    var = float(grad @ cov @ grad) / batch.n
    return est.MCEstimate(diff, math.sqrt(max(var, 0.0)), batch.n)


def run_contractivity(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    batch = sample_heat_kernel(
        alg, SamplerConfig(s=cfg.a, n=cfg.n, steps=cfg.steps, seed=cfg.seed),
        workers=cfg.workers,
    )
    if cfg.f_text:
        polys = [hp.parse_poly(alg, cfg.f_text)]
    else:
        polys = _family(alg, cfg, "contractivity", 5)
    p_values = [cfg.p] if cfg.f_text else [0.5, 1.0, 2.0, 4.0]
    checks = []
    for i, f in enumerate(polys):
        for p in p_values:
            for t_from, t_to in zip(cfg.t_grid[:-1], cfg.t_grid[1:]):
                inc = _norm_increment(
                    f, p, math.exp(-t_from), math.exp(-t_to), batch
                )
                threshold = 2.0 * inc.stderr
                checks.append(
                    CheckRecord(
                        f"monotone-f{i}-p{p:g}-t{t_to:g}",
                        inc.mean, inc.stderr, threshold, inc.mean <= threshold,
                    )
                )
    report = Report("contractivity", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


# ---------------------------------------------------------------------------
# logarithmic Sobolev probe and strong hypercontractivity


def probe_constant(alg, batch: SampleBatch, family) -> tuple[est.MCEstimate, list]:
    """Empirical constant: the largest entropy-to-energy ratio over a family.

    Constants are skipped (their energy vanishes and the ratio is undefined).
    The returned value is a lower bound for the true constant over the full
    form domain, because the family is finite and polynomial.
    """
    ratios = []
    for idx, f in enumerate(family):
        if hp.euler_Z(f).is_zero:
            continue
        ratios.append((idx, est.lsi_ratio(f, batch)))
    if not ratios:
        raise ValueError("probe family contained only constants")
    best_idx, best = max(ratios, key=lambda item: item[1].mean)
    return best, ratios


def run_lsi_probe(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    batch = sample_heat_kernel(
        alg, SamplerConfig(s=cfg.a, n=cfg.n, steps=cfg.steps, seed=cfg.seed),
        workers=cfg.workers,
    )
    family = _family(alg, cfg, "lsi-probe", cfg.family_size)
    best, ratios = probe_constant(alg, batch, family)
    checks = []
    for idx, r in ratios:
        checks.append(
            CheckRecord(
                f"lsi-ratio-{idx}", r.mean, r.stderr, best.mean + 3.0 * best.stderr,
                r.mean <= best.mean + 3.0 * best.stderr,
            )
        )
    checks.append(CheckRecord("c-emp", best.mean, best.stderr, best.mean, True))
    report = Report("lsi-probe", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


def janson_time(c: float, p: float, q: float) -> float:
    return 0.5 * c * math.log(p / q)


def defect_bound(beta: float, p: float, q: float) -> float:
    return math.exp(2.0 * beta * (1.0 / q - 1.0 / p))


def run_shc(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    batch = sample_heat_kernel(
        alg, SamplerConfig(s=cfg.a, n=cfg.n, steps=cfg.steps, seed=cfg.seed),
        workers=cfg.workers,
    )
    if cfg.c is not None:
        c_used, c_err = cfg.c, 0.0
    elif cfg.c_from_probe:
        family = _family(alg, cfg, "lsi-probe", cfg.family_size)
        best, _ = probe_constant(alg, batch, family)
        c_used, c_err = best.mean, best.stderr
    else:
        raise la.StructuralError("strong hypercontractivity needs --c or --c-from-probe")

    if cfg.f_text:
        polys = [hp.parse_poly(alg, cfg.f_text)]
    else:
        polys = _family(alg, cfg, "shc-held-out", 5, offset=cfg.family_size)

    t_j = janson_time(c_used, cfg.p, cfg.q)
    bound = defect_bound(cfg.beta, cfg.p, cfg.q)
    times = sorted({t_j, *[t for t in cfg.t_grid if t >= t_j]})
    checks = [CheckRecord("c-used", c_used, c_err, c_used, True),
              CheckRecord("t-janson", t_j, 0.0, t_j, True)]
    for i, f in enumerate(polys):
        norm_q = est.lp_norm(f, cfg.q, batch)
        if norm_q.mean == 0:
            continue
        for t in times:
            ratio = est.norm_ratio(hp.semigroup_B(f, t, cfg.a), cfg.p, f, cfg.q, batch)
            rel = ratio.stderr / ratio.mean if ratio.mean > 0 else 0.0
            threshold = bound * (1.0 + 2.0 * rel)
            checks.append(
                CheckRecord(
                    f"shc-f{i}-t{t:.6g}", ratio.mean, ratio.stderr, threshold,
                    ratio.mean <= threshold,
                )
            )
    report = Report("shc", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


# ---------------------------------------------------------------------------
# kernel validation and non-holomorphy


def run_kernel_check(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    kcfg = _kernel_cfg(cfg)
    if hk.heisenberg_index(alg) is None:
        raise la.StructuralError("kernel-check requires a heisenberg:n group")
    checks = []
    s = cfg.a

    total = hk.normalization_integral(alg, s, kcfg)
    checks.append(CheckRecord("normalization", abs(total - 1.0), 0.0, 1e-3,
                              abs(total - 1.0) <= 1e-3))

    stream = Stream("kernel-check", cfg.seed)
    worst_scaling = 0.0
    for _ in range(50):
        x = np.array(stream.unit_disc(alg.N)) * 1.2
        lam = 0.5 + complex(stream.unit_disc()) * 0.8
        s_rand = s * (0.5 + stream.uniform())
        worst_scaling = max(
            worst_scaling, hk.scaling_residual(alg, s_rand, lam, x, kcfg)
        )
    checks.append(CheckRecord("scaling-relation", worst_scaling, 0.0, 1e-6,
                              worst_scaling <= 1e-6))

    worst_sym = 0.0
    for _ in range(10):
        x = np.array(stream.unit_disc(alg.N)) * 1.5
        worst_sym = max(worst_sym, abs(hk.rho(alg, s, x, kcfg) - hk.rho(alg, s, -x, kcfg)))
    checks.append(CheckRecord("inversion-symmetry", worst_sym, 0.0, 1e-9,
                              worst_sym <= 1e-9))

    # sampler cross-check on the kernel-smoothed scale: both sides carry the
    # identical product-Gaussian smoothing, so the comparison is noise-only
    s_kde = 0.02
    bw = cfg.bandwidth
    batch = sample_heat_kernel(
        alg, SamplerConfig(s=s_kde, n=cfg.n, steps=cfg.steps, seed=cfg.seed),
        workers=cfg.workers,
    )
    ref_points = _kde_reference_points(alg)
    worst_rel = 0.0
    for x in ref_points:
        kd = est.kde_estimate(batch, x, bw)
        sm = hk.rho_smoothed(alg, s_kde, x, bw, bw**2, kcfg)
        worst_rel = max(worst_rel, abs(kd - sm) / sm)
    checks.append(CheckRecord("mc-kde-crosscheck", worst_rel, 0.0, 0.05,
                              worst_rel <= 0.05))

    # qualitative Gaussian decay along dilated rays: log rho must fall
    # monotonically in the tail and be dominated above by -const * e^{2t}.
    # Each ray is walked outward only while the kernel stays above the
    # quadrature noise floor (center-heavy rays decay much faster than
    # horizontal ones).
    min_tail_ratio = math.inf
    worst_tail_increment = -math.inf
    for _ in range(10):
        x = np.array(stream.unit_disc(alg.N))
        x /= max(la.homogeneous_norm(alg, x), 1e-9)
        logs = []
        t = 0.1
        while len(logs) < 8:
            hx2, zc = hk._split_point(alg, la.dilate(alg, math.exp(t), x))
            value = hk._rho_reduced(
                s, hx2, zc, 2 * hk.heisenberg_index(alg), kcfg,
                enforce_positive=False,
            )
            if value < 1e-8:
                break
            logs.append((t, math.log(value)))
            t += 0.12
        if len(logs) < 4:
            continue
        tail = logs[len(logs) // 2:]
        incs = [b[1] - a[1] for a, b in zip(tail[:-1], tail[1:])]
        worst_tail_increment = max(worst_tail_increment, max(incs))
        t_last, log_last = logs[-1]
        min_tail_ratio = min(min_tail_ratio, -log_last / math.exp(2 * t_last))
    checks.append(CheckRecord("decay-monotone-tail", worst_tail_increment, 0.0, 0.0,
                              worst_tail_increment <= 0.0))
    checks.append(CheckRecord("decay-gaussian-ratio", min_tail_ratio, 0.0, 0.0,
                              min_tail_ratio > 0.0))

    report = Report("kernel-check", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)


def _kde_reference_points(alg) -> list[np.ndarray]:
    """Frozen moderate-density reference points for the s = 0.02 cross-check."""
    base = [
        (0.10, 0.08, 0.004),
        (0.12 + 0.05j, -0.06, -0.003),
        (-0.08, 0.11j, 0.005j),
        (0.05, 0.05, 0.0),
        (0.14, 0.02 - 0.08j, 0.002 - 0.003j),
    ]
    points = []
    for tup in base:
        x = np.zeros(alg.N, dtype=np.complex128)
        x[0], x[1], x[alg.d1] = tup
        points.append(x)
    return points


def run_nonholo(cfg: ExperimentConfig) -> Report:
    t0 = time.time()
    alg = la.load_group(cfg.group)
    kcfg = _kernel_cfg(cfg)
    if hk.heisenberg_index(alg) is None:
        raise la.StructuralError("nonholo requires a heisenberg:n group")
    f = hp.coordinate(alg, alg.d1)  # the center coordinate
    witness_point = np.zeros(alg.N, dtype=np.complex128)
    witness_point[alg.d1] = 1.0

    z_val = hp.evaluate(hp.euler_Z(f), witness_point)
    checks = [
        CheckRecord("Zf-at-center", abs(z_val - 2.0), 0.0, 1e-12,
                    abs(z_val - 2.0) <= 1e-12)
    ]
    a_val = abs(hk.apply_A(f, cfg.a, witness_point, kcfg))
    checks.append(CheckRecord("Af-at-center", a_val, 0.0, 1e-6, a_val <= 1e-6))

    search = hk.nonholomorphy_witness(f, cfg.a, kcfg)
    ratio = search["residual"] / max(search["baseline"], 1e-300)
    checks.append(CheckRecord("dbar-residual", search["residual"], 0.0,
                              10.0 * search["baseline"],
                              search["residual"] > 10.0 * search["baseline"]))
    checks.append(CheckRecord("dbar-ratio", ratio, 0.0, 10.0, ratio > 10.0))
    report = Report("nonholo", cfg.to_dict(), cfg.seed, checks)
    return _finish(report, t0, cfg)
