"""Experiment orchestration: loss generators, sweeps, audits, CSV/SVG output.

Configs are line-oriented ``key = value`` files with bracketed section
headers.  A fixed seed makes every output byte-identical across re-runs:
losses come from reserved adversary streams, results are written in
deterministic order, and floats are serialized with shortest round-trip
formatting.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bwe as bwe_mod
from . import oco as oco_mod
from .bandit import lemma7_audit, run_bandit, run_bandit_batch
from .gbpa import (
    FTPL,
    FTRL,
    LogBarrier,
    Potential,
    RunRecord,
    Shannon,
    TsallisEntropy,
    run_experts,
    stability_level,
)
from .perturbation import ObjPertNoiseSpec, PerturbationSpec, table1_preset
from .rng import ADVERSARY_ROUND, stream

# ---------------------------------------------------------------------------
# Adversaries
# ---------------------------------------------------------------------------


@dataclass
class AdversarySpec:
    """Oblivious loss generator.

    kinds: ``iid-bernoulli`` (per-arm means), ``planted-best`` (one arm better
    by ``gap``), ``switching`` (best arm rotates every ``period`` rounds),
    ``csv-file`` (fixed losses from disk), ``uniform-advice`` and
    ``planted-good-expert`` (bandits-with-experts instances), and
    ``linear-shifted`` (loss-only linear losses for the convex pipeline).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def generate(self, T: int, seed: int, replicate: int):
        p = self.params
        g = stream(seed, replicate, ADVERSARY_ROUND)
        if self.kind == "iid-bernoulli":
            means = np.asarray(p["means"], dtype=float)
            return (g.random((T, means.size)) < means).astype(float)
        if self.kind == "planted-best":
            n, rate, gap = int(p["arms"]), float(p["rate"]), float(p["gap"])
            means = np.full(n, rate)
            means[0] = rate - gap
            return (g.random((T, n)) < means).astype(float)
        if self.kind == "switching":
            n, rate, gap = int(p["arms"]), float(p["rate"]), float(p["gap"])
            period = int(p["period"])
            means = np.full((T, n), rate)
            best = (np.arange(T) // period) % n
            means[np.arange(T), best] = rate - gap
            return (g.random((T, n)) < means).astype(float)
        if self.kind == "csv-file":
            losses = np.loadtxt(p["path"], delimiter=",", ndmin=2)
            if losses.shape[0] < T:
                raise ValueError(f"csv has {losses.shape[0]} rounds, need {T}")
            return losses[:T]
        if self.kind == "uniform-advice":
            means = np.asarray(p["means"], dtype=float)
            losses = (g.random((T, means.size)) < means).astype(float)
            advice = bwe_mod.uniform_advice(T, int(p["experts"]), means.size, seed, replicate)
            return losses, advice
        if self.kind == "planted-good-expert":
            return bwe_mod.planted_good_expert(
                T, int(p["experts"]), int(p["actions"]), seed, replicate,
                mean=float(p.get("mean", 0.5)),
            )
        if self.kind == "linear-shifted":
            domain = oco_mod.BallDomain(int(p["dim"]), float(p["radius"]))
            return oco_mod.linear_shifted_losses(T, domain, float(p["beta"]), seed, replicate)
        raise ValueError(f"unknown adversary kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Potential / spec parsing
# ---------------------------------------------------------------------------


def parse_potential(text: str) -> Potential:
    """Parse 'ftpl family=... k=v ...' | 'ftpl preset=gamma arms=10 [scale=1]'
    | 'ftrl reg=shannon|tsallis|log-barrier eta=... [alpha=...]'."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty potential spec")
    kind = tokens[0].lower()
    kv = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ValueError(f"bad token {tok!r}; expected key=value")
        k, v = tok.split("=", 1)
        kv[k] = v
    if kind == "ftpl":
        if "preset" in kv:
            return FTPL(table1_preset(kv["preset"], int(kv["arms"]), float(kv.get("scale", 1.0))))
        return FTPL(PerturbationSpec.from_text(text[len(tokens[0]) :].strip()))
    if kind == "ftrl":
        reg = kv.get("reg", "")
        eta = float(kv.get("eta", 1.0))
        if reg == "shannon":
            return FTRL(Shannon(eta))
        if reg == "tsallis":
            return FTRL(TsallisEntropy(eta, float(kv["alpha"])))
        if reg in ("log-barrier", "log_barrier", "logbarrier"):
            return FTRL(LogBarrier(eta))
        raise ValueError(f"unknown regularizer {reg!r}")
    raise ValueError(f"potential kind must be ftpl or ftrl, got {kind!r}")


def potential_to_text(potential: Potential) -> str:
    if isinstance(potential, FTPL):
        return "ftpl " + potential.spec.to_text()
    reg = potential.reg
    if isinstance(reg, Shannon):
        return f"ftrl reg=shannon eta={reg.eta:g}"
    if isinstance(reg, TsallisEntropy):
        return f"ftrl reg=tsallis eta={reg.eta:g} alpha={reg.alpha:g}"
    return f"ftrl reg=log-barrier eta={reg.eta:g}"


# ---------------------------------------------------------------------------
# Fits and audits
# ---------------------------------------------------------------------------


def scaling_fit(points) -> tuple[float, float, float]:
    """Ordinary least squares on log-log pairs: (slope, intercept, r^2)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 4:
        raise ValueError("need at least 4 checkpoints")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("scaling fits need positive values")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


@dataclass
class AuditReport:
    name: str
    lhs: float
    rhs: float
    stderr: float
    passed: bool
    n: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name}: {status} lhs={self.lhs:.6g} rhs={self.rhs:.6g} "
            f"stderr={self.stderr:.3g} n={self.n}{' ' + self.detail if self.detail else ''}"
        )


def _lstar(record) -> float:
    return record.best_loss if isinstance(record, RunRecord) else record.offline_value


def audit_key_lemma(records, epsilon: float, delta: float, B: float) -> AuditReport:
    """First-order regret inequality over paired traces of the algorithm and
    its one-step-lookahead twin:
    mean Regret(A) <= 2 eps mean L* + 3 mean Regret(A+) + delta B T + 3 SE."""
    regret_a, regret_plus, lstars, T = [], [], [], None
    for rec in records:
        if rec.lookahead_losses is None:
            raise ValueError("records need the lookahead column")
        if T is None:
            T = len(rec.losses)
        elif T != len(rec.losses):
            raise ValueError("mismatched trace lengths")
        regret_a.append(rec.realized_regret)
        regret_plus.append(float(rec.lookahead_losses.sum()) - _lstar(rec))
        lstars.append(_lstar(rec))
    regret_a = np.array(regret_a)
    regret_plus = np.array(regret_plus)
    lstars = np.array(lstars)
    diffs = regret_a - 2.0 * epsilon * lstars - 3.0 * regret_plus
    se = float(diffs.std(ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else 0.0
    lhs = float(regret_a.mean())
    rhs = float(2.0 * epsilon * lstars.mean() + 3.0 * regret_plus.mean() + delta * B * T)
    passed = bool(diffs.mean() <= delta * B * T + 3.0 * se)
    return AuditReport("key-lemma", lhs, rhs, se, passed, diffs.size,
                       detail=f"eps={epsilon:.4g} delta={delta:g} B={B:g}")


def audit_lemma2(records, potential: Potential, epsilon: float | None = None) -> AuditReport:
    """Bandit regret decomposition: mean realized regret <= eps * mean sum of
    stability summands + potential range + 3 SE (exact-mode traces only)."""
    if not isinstance(potential, FTRL):
        raise ValueError("the decomposition audit runs for regularized leaders only")
    gamma, level = stability_level(potential)
    if epsilon is None:
        epsilon = level
    regrets, sums = [], []
    n = T = None
    for rec in records:
        if rec.summands is None:
            raise ValueError("records lack stability summands (exact mode only)")
        regrets.append(rec.realized_regret)
        sums.append(float(rec.summands.sum()))
        T = len(rec.losses)
        n = rec.est_cum.size
    regrets = np.array(regrets)
    sums = np.array(sums)
    reg = potential.reg
    if isinstance(reg, LogBarrier):
        tau = 1.0 / (n * T)
        f_range = reg.range_on_simplex(n, tau) + tau * n * T
    else:
        f_range = reg.range_on_simplex(n)
    diffs = regrets - epsilon * sums
    se = float(diffs.std(ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else 0.0
    lhs = float(regrets.mean())
    rhs = float(epsilon * sums.mean() + f_range)
    passed = bool(diffs.mean() <= f_range + 3.0 * se)
    return AuditReport("lemma2", lhs, rhs, se, passed, diffs.size,
                       detail=f"eps={epsilon:.4g} gamma={gamma:g} range={f_range:.4g}")


def audit_lemma7(records, potential: Potential, slack: float = 1e-8) -> AuditReport:
    gamma, level = stability_level(potential)
    ok = all(lemma7_audit(rec, level, gamma, slack) for rec in records)
    return AuditReport("lemma7", 0.0, 0.0, 0.0, ok, len(records),
                       detail=f"eps={level:.4g} gamma={gamma:g}")


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Parsed config: raw string sections plus typed accessors for the core keys."""

    raw: dict[str, dict[str, str]]

    @property
    def problem(self) -> str:
        return self.raw["experiment"]["problem"]

    @property
    def rounds(self) -> int:
        return int(self.raw["experiment"]["rounds"])

    @property
    def replicates(self) -> int:
        return int(self.raw["experiment"].get("replicates", "1"))

    @property
    def seed(self) -> int:
        return int(self.raw["experiment"].get("seed", "0"))

    @property
    def out_dir(self) -> Path:
        return Path(self.raw["experiment"].get("out_dir", "results"))

    @property
    def workers(self) -> int:
        return int(self.raw["experiment"].get("workers", "1"))

    @property
    def svg(self) -> bool:
        return self.raw["experiment"].get("svg", "false").lower() in ("1", "true", "yes")

    @property
    def audits(self) -> list[str]:
        text = self.raw.get("audits", {}).get("run", "")
        return [a.strip() for a in text.split(",") if a.strip()]

    def sweep(self) -> tuple[str | None, list[str]]:
        sw = self.raw.get("sweep")
        if not sw or "parameter" not in sw:
            return None, [""]
        values = [v.strip() for v in sw["values"].split(",")]
        return sw["parameter"], values

    def cell(self, parameter: str | None, value: str) -> "ExperimentConfig":
        raw = {sec: dict(kv) for sec, kv in self.raw.items()}
        raw.pop("sweep", None)
        if parameter:
            section, key = parameter.split(".", 1)
            raw.setdefault(section, {})[key] = value
        return ExperimentConfig(raw)

    def hash(self) -> str:
        lines = sorted(
            f"{sec}.{key}={val}" for sec, kv in self.raw.items() for key, val in kv.items()
        )
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def load_config(path) -> ExperimentConfig:
    parser = ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    raw = {sec: dict(parser.items(sec)) for sec in parser.sections()}
    if "experiment" not in raw:
        raise ValueError("config needs an [experiment] section")
    return ExperimentConfig(raw)


def _parse_means(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def build_adversary(cfg: ExperimentConfig) -> AdversarySpec:
    sec = dict(cfg.raw.get("adversary", {}))
    kind = sec.pop("kind")
    params: dict = dict(sec)
    if "means" in params:
        params["means"] = _parse_means(params["means"])
    return AdversarySpec(kind, params)


def build_potential(cfg: ExperimentConfig) -> Potential:
    sec = cfg.raw["potential"]
    if "spec" in sec:
        return parse_potential(sec["spec"])
    kind = sec["kind"]
    if kind == "ftpl":
        if "preset" in sec:
            return FTPL(
                table1_preset(sec["preset"], int(sec["arms"]), float(sec.get("epsilon_scale", 1.0)))
            )
        return FTPL(PerturbationSpec.from_text(sec["family_spec"]))
    reg = sec["reg"]
    eta = float(sec.get("eta", "1.0"))
    if reg == "shannon":
        return FTRL(Shannon(eta))
    if reg == "tsallis":
        return FTRL(TsallisEntropy(eta, float(sec["alpha"])))
    return FTRL(LogBarrier(eta))


# ---------------------------------------------------------------------------
# Running experiments
# ---------------------------------------------------------------------------


def checkpoints_pow2(T: int) -> list[int]:
    return [1 << k for k in range(T.bit_length()) if (1 << k) <= T]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass
class CellResult:
    config_hash: str
    sweep_value: str
    rows: list[tuple]  # (replicate, t, regret, loss, arm)
    checkpoints: list[int]
    regret_curves: np.ndarray | None  # (R, len(checkpoints))
    error: str = ""
    audit_lines: list[str] = field(default_factory=list)


def _experts_cell(cfg, potential, adversary, want_lookahead):
    T, R, seed = cfg.rounds, cfg.replicates, cfg.seed

    def one(r):
        losses = adversary.generate(T, seed, r)
        return run_experts(potential, losses, seed, replicate=r,
                           record_probs=False, lookahead=want_lookahead)

    return _map_replicates(one, R, cfg.workers)


def _bandit_cell(cfg, potential, adversary, gamma):
    T, R, seed = cfg.rounds, cfg.replicates, cfg.seed
    sec = cfg.raw.get("bandit", {})
    mode = sec.get("mode", "exact")
    record = "lemma7" in cfg.audits
    if mode == "exact":
        losses = np.stack([adversary.generate(T, seed, r) for r in range(R)])
        return run_bandit_batch(potential, losses, seed, gamma=gamma, record_probs=record)
    cap = int(sec["gr_cap"]) if "gr_cap" in sec else None

    def one(r):
        losses = adversary.generate(T, seed, r)
        return run_bandit(potential, losses, "gr", seed, replicate=r, gr_cap=cap)

    return _map_replicates(one, R, cfg.workers)


def _bwe_cell(cfg, potential, adversary):
    T, R, seed = cfg.rounds, cfg.replicates, cfg.seed
    rho = float(cfg.raw.get("bwe", {}).get("rho", "0.0"))

    def one(r):
        losses, advice = adversary.generate(T, seed, r)
        return bwe_mod.run_bwe(potential, losses, advice, bwe_mod.ClipConfig(rho), seed,
                               replicate=r, record_probs=False)

    return _map_replicates(one, R, cfg.workers)


def _oco_cell(cfg, adversary, want_lookahead):
    T, R, seed = cfg.rounds, cfg.replicates, cfg.seed
    sec = cfg.raw["oco"]
    domain = oco_mod.BallDomain(int(sec["dim"]), float(sec["radius"]))
    noise = ObjPertNoiseSpec(
        sec.get("noise", "gamma"),
        domain.dimension,
        float(sec["epsilon"]),
        float(sec.get("beta", "1.0")),
        delta=float(sec["delta"]) if "delta" in sec else None,
    )
    fixed = sec.get("fixed_noise", "false").lower() in ("1", "true", "yes")

    def one(r):
        losses = adversary.generate(T, seed, r)
        return oco_mod.run_oco(domain, losses, noise, seed, replicate=r,
                               fixed_noise=fixed, lookahead=want_lookahead)

    return _map_replicates(one, R, cfg.workers), domain, noise


def _map_replicates(fn, R, workers):
    if workers <= 1:
        return [fn(r) for r in range(R)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(R)))


def _oco_prefix_lstar(records, cfg, checkpoints):
    # recompute the offline optimum on each prefix (linear losses: closed form)
    sec = cfg.raw["oco"]
    domain = oco_mod.BallDomain(int(sec["dim"]), float(sec["radius"]))
    adversary = build_adversary(cfg)
    out = np.zeros((len(records), len(checkpoints)))
    for r in range(len(records)):
        losses = adversary.generate(cfg.rounds, cfg.seed, r)
        for ci, c in enumerate(checkpoints):
            _, val = oco_mod.offline_opt(domain, losses[:c])
            out[r, ci] = val
    return out


def _run_cell(cfg: ExperimentConfig, sweep_value: str) -> CellResult:
    chash = cfg.hash()
    T = cfg.rounds
    cps = checkpoints_pow2(T)
    audits = cfg.audits
    want_lookahead = "key-lemma" in audits
    try:
        problem = cfg.problem
        adversary = build_adversary(cfg)
        if problem == "oco":
            records, domain, noise = _oco_cell(cfg, adversary, want_lookahead)
            lstar_prefix = _oco_prefix_lstar(records, cfg, cps)
            curves = np.array(
                [[rec.cum_loss[c - 1] - lstar_prefix[r, ci] for ci, c in enumerate(cps)]
                 for r, rec in enumerate(records)]
            )
        else:
            potential = build_potential(cfg)
            if problem == "experts":
                records = _experts_cell(cfg, potential, adversary, want_lookahead)
            elif problem == "bandit":
                gamma = cfg.raw.get("bandit", {}).get("gamma")
                records = _bandit_cell(cfg, potential, adversary,
                                       float(gamma) if gamma else None)
            elif problem == "bwe":
                records = _bwe_cell(cfg, potential, adversary)
            else:
                raise ValueError(f"unknown problem {problem!r}")
            curves = np.array([[rec.regret_at(c) for c in cps] for rec in records])
        rows = []
        for r, rec in enumerate(records):
            for ci, c in enumerate(cps):
                arm = 0 if problem == "oco" else int(rec.arms[c - 1])
                rows.append((r, c, curves[r][ci], float(rec.losses[c - 1]), arm))
        audit_lines = _run_audits(cfg, records)
        return CellResult(chash, sweep_value, rows, cps, curves, audit_lines=audit_lines)
    except Exception as exc:  # a failed cell is recorded, others proceed
        return CellResult(chash, sweep_value, [], cps, None, error=f"{type(exc).__name__}: {exc}")


def _run_audits(cfg, records) -> list[str]:
    lines = []
    audits = cfg.audits
    if not audits:
        return lines
    problem = cfg.problem
    if "key-lemma" in audits:
        sec = cfg.raw.get("key_lemma", {})
        epsilon = float(sec.get("epsilon", cfg.raw.get("oco", {}).get("epsilon", "1.0")))
        delta = float(sec.get("delta", "0.0"))
        B = float(sec.get("loss_bound", "1.0"))
        lines.append(audit_key_lemma(records, epsilon, delta, B).line())
    if problem == "bandit":
        potential = build_potential(cfg)
        if "lemma2" in audits:
            lines.append(audit_lemma2(records, potential).line())
        if "lemma7" in audits:
            need = [r for r in records if r.probs is not None]
            if need:
                lines.append(audit_lemma7(need, potential).line())
            else:
                lines.append("lemma7: SKIP (distributions not recorded)")
    return lines


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Run every sweep cell x replicate, then write per-run and aggregate CSVs
    (plus optional SVG regret curves and an audit report)."""
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    parameter, values = cfg.sweep()
    cells = [(_run_cell(cfg.cell(parameter, v), v)) for v in values]

    per_run = out_dir / "per_run.csv"
    with open(per_run, "w") as fh:
        fh.write("config_hash,replicate,t,regret,loss,arm\n")
        for cell in cells:
            for r, t, regret, loss, arm in cell.rows:
                fh.write(f"{cell.config_hash},{r},{t},{_fmt(regret)},{_fmt(loss)},{arm}\n")

    aggregate = out_dir / "aggregate.csv"
    with open(aggregate, "w") as fh:
        fh.write("config_hash,sweep_value,T_checkpoint,mean_regret,stderr,n,error\n")
        for cell in cells:
            if cell.regret_curves is None:
                fh.write(f"{cell.config_hash},{cell.sweep_value},,,,0,{cell.error}\n")
                continue
            for ci, c in enumerate(cell.checkpoints):
                col = cell.regret_curves[:, ci]
                mean = float(col.mean())
                se = float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else 0.0
                fh.write(
                    f"{cell.config_hash},{cell.sweep_value},{c},{_fmt(mean)},{_fmt(se)},{col.size},\n"
                )

    written = [per_run, aggregate]
    audit_lines = [line for cell in cells for line in cell.audit_lines]
    if audit_lines:
        audit_path = out_dir / "audits.txt"
        audit_path.write_text("\n".join(audit_lines) + "\n")
        written.append(audit_path)
    if cfg.svg:
        svg_path = out_dir / "curves.svg"
        series = {}
        for cell in cells:
            if cell.regret_curves is None:
                continue
            label = cell.sweep_value or cell.config_hash
            series[label] = (cell.checkpoints, cell.regret_curves.mean(axis=0))
        write_svg_lines(svg_path, series, "T", "mean regret", loglog=True)
        written.append(svg_path)
    return written


# ---------------------------------------------------------------------------
# Minimal SVG line charts
# ---------------------------------------------------------------------------

_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_svg_lines(path, series: dict, xlabel: str, ylabel: str, loglog: bool = False):
    """Plot named (xs, ys) series as polylines with axes and a legend."""
    width, height, pad = 640, 420, 56
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        xs_all, ys_all = [1.0], [1.0]
    tx = (lambda v: math.log10(max(v, 1e-300))) if loglog else (lambda v: v)
    x0, x1 = min(map(tx, xs_all)), max(map(tx, xs_all))
    y0, y1 = min(map(tx, ys_all)), max(map(tx, ys_all))
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(v):
        return pad + (tx(v) - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (tx(v) - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">{xlabel}</text>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {height / 2:.1f})">{ylabel}</text>',
    ]
    for k in range(5):
        fx = x0 + k * (x1 - x0) / 4
        fy = y0 + k * (y1 - y0) / 4
        vx = 10**fx if loglog else fx
        vy = 10**fy if loglog else fy
        gx = pad + k * (width - 2 * pad) / 4
        gy = height - pad - k * (height - 2 * pad) / 4
        parts.append(
            f'<text x="{gx:.1f}" y="{height - pad + 16}" text-anchor="middle" font-size="11">{vx:.3g}</text>'
        )
        parts.append(
            f'<text x="{pad - 6}" y="{gy:.1f}" text-anchor="end" font-size="11">{vy:.3g}</text>'
        )
    for idx, (label, (xs, ys)) in enumerate(series.items()):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = pad + 16 * idx
        parts.append(f'<line x1="{width - pad - 110}" y1="{ly}" x2="{width - pad - 90}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad - 84}" y="{ly + 4}" font-size="11">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
