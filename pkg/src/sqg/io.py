"""Run directories: config files, manifests, diagnostics streams, resume and export.

Layout of a run directory::

    config.txt           the parsed configuration, normalised
    manifest.json        RunManifest
    diagnostics.jsonl    one DiagnosticsFrame per line
    flux.csv             t,Q,Pi_Q,term_rQ,term_high,bound,ratio
    snapshots/snap_<step>.bin
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .diagnostics import SCHEMA_VERSION as DIAG_SCHEMA
from .diagnostics import DiagnosticsFrame, diagnose
from .solver import (
    Accumulators,
    ConfigError,
    InitialConditionSpec,
    Sink,
    SolverConfig,
    Trajectory,
    integrate,
)
from .spectral import GridError, read_snapshot, write_snapshot

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "sqg.manifest/1"
CSV_SCHEMA = "sqg.csv/1"
FLUX_COLUMNS = ("t", "Q", "Pi_Q", "term_rQ", "term_high", "bound", "ratio")
STATUSES = ("completed", "blown_up", "unresolved", "aborted")
EXPORT_KINDS = ("energy", "flux", "criterion", "spectrum")


class CorruptionError(RuntimeError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def output_root(default="runs") -> Path:
    return Path(os.environ.get("SQG_OUTPUT_DIR") or default)


def fmt(x) -> str:
    """17 significant digits, lossless for float64."""
    return format(float(x), ".17g")


def blob_sha1(data: bytes) -> str:
    """Git-style content checksum."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def file_sha1(path) -> str:
    return blob_sha1(Path(path).read_bytes())


# -- configuration ------------------------------------------------------------

REQUIRED = ("alpha", "kappa", "N", "t_end", "ic")
_FLOAT_KEYS = ("alpha", "kappa", "epsilon", "t_end", "c0", "dealias_fraction")
_INT_KEYS = ("N", "seed", "snapshot_every", "diagnostics_every")
_IC_KEYS = ("ic_k", "ic_amplitude", "ic_beta", "ic_k_min", "ic_k_max", "ic_seed",
            "ic_centers", "ic_widths", "ic_amplitudes")
KNOWN_KEYS = set(REQUIRED) | set(_FLOAT_KEYS) | set(_INT_KEYS) | set(_IC_KEYS) | {"dt", "advection", "name"}


def _floats(text, sep=","):
    return tuple(float(x) for x in text.replace(" ", "").split(sep) if x)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_text(text: str, source="<config>") -> SolverConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected key=value: {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}: {line.strip()!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno, line.strip())
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"{source}: missing required key {key!r}")

    def get(key, conv, default=None):
        if key not in raw:
            return default
        value, lineno, line = raw[key]
        try:
            return conv(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {line!r} ({exc})") from None

    kind = raw["ic"][0]
    ic_kw = {}
    if "ic_k" in raw:
        ic_kw["k"] = get("ic_k", lambda v: tuple(int(x) for x in v.split(",")))
    for key, name in (("ic_amplitude", "amplitude"), ("ic_beta", "beta"),
                      ("ic_k_min", "k_min"), ("ic_k_max", "k_max")):
        if key in raw:
            ic_kw[name] = get(key, float)
    if "ic_seed" in raw:
        ic_kw["seed"] = get("ic_seed", int)
    if "ic_centers" in raw:
        ic_kw["centers"] = get("ic_centers", lambda v: tuple(_floats(c) for c in v.split(";") if c.strip()))
    if "ic_widths" in raw:
        ic_kw["widths"] = get("ic_widths", _floats)
    if "ic_amplitudes" in raw:
        ic_kw["amplitudes"] = get("ic_amplitudes", _floats)
    try:
        ic = InitialConditionSpec(kind, **ic_kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}:{raw['ic'][1]}: {exc}") from None

    kw = {}
    for key in _FLOAT_KEYS:
        if key in raw:
            kw[key] = get(key, float)
    for key in _INT_KEYS:
        if key in raw:
            kw[key] = get(key, int)
    if "dt" in raw:
        kw["dt"] = get("dt", lambda v: None if v.lower() == "auto" else float(v))
    if "advection" in raw:
        kw["advection"] = get("advection", _bool)
    if "name" in raw:
        kw["name"] = raw["name"][0]
    try:
        return SolverConfig(ic=ic, **kw)
    except (ConfigError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path) -> SolverConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such config file")
    return parse_config_text(path.read_text(), str(path))


def config_to_text(cfg: SolverConfig) -> str:
    """Inverse of :func:`parse_config_text`."""
    ic = cfg.ic
    lines = [
        f"alpha = {fmt(cfg.alpha)}",
        f"kappa = {fmt(cfg.kappa)}",
        f"epsilon = {fmt(cfg.epsilon)}",
        f"N = {cfg.N}",
        f"dealias_fraction = {fmt(cfg.dealias_fraction)}",
        f"dt = {'auto' if cfg.dt is None else fmt(cfg.dt)}",
        f"t_end = {fmt(cfg.t_end)}",
        f"c0 = {fmt(cfg.c0)}",
        f"seed = {cfg.seed}",
        f"snapshot_every = {cfg.snapshot_every}",
        f"diagnostics_every = {cfg.diagnostics_every}",
        f"advection = {'true' if cfg.advection else 'false'}",
        f"ic = {ic.kind}",
    ]
    if cfg.name is not None:
        lines.append(f"name = {cfg.name}")
    if ic.kind == "single_mode":
        lines += [f"ic_k = {ic.k[0]},{ic.k[1]}", f"ic_amplitude = {fmt(ic.amplitude)}"]
    elif ic.kind == "random_spectrum":
        lines += [f"ic_beta = {fmt(ic.beta)}", f"ic_k_min = {fmt(ic.k_min)}",
                  f"ic_k_max = {fmt(ic.k_max)}", f"ic_amplitude = {fmt(ic.amplitude)}"]
        if ic.seed is not None:
            lines.append(f"ic_seed = {ic.seed}")
    else:
        lines += [
            "ic_centers = " + "; ".join(",".join(fmt(x) for x in c) for c in ic.centers),
            "ic_widths = " + ",".join(fmt(w) for w in ic.widths),
            "ic_amplitudes = " + ",".join(fmt(a) for a in ic.amplitudes),
        ]
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: SolverConfig) -> dict:
    d = asdict(cfg)
    d["ic"] = {k: (list(map(list, v)) if k == "centers" else list(v) if isinstance(v, tuple) else v)
               for k, v in asdict(cfg.ic).items()}
    return d


def config_from_dict(d: dict) -> SolverConfig:
    d = dict(d)
    ic = dict(d.pop("ic"))
    ic["k"] = tuple(ic["k"])
    ic["centers"] = tuple(tuple(c) for c in ic["centers"])
    ic["widths"] = tuple(ic["widths"])
    ic["amplitudes"] = tuple(ic["amplitudes"])
    return SolverConfig(ic=InitialConditionSpec(**ic), **d)


# -- manifest -------------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    run_dir: str
    dt: float
    n_steps: int
    status: str = "aborted"
    flags: list = field(default_factory=list)
    schema_version: str = MANIFEST_SCHEMA
    diagnostics_schema: str = DIAG_SCHEMA
    csv_schema: str = CSV_SCHEMA
    artifacts: dict = field(default_factory=dict)  # name -> relative path
    checksums: dict = field(default_factory=dict)  # relative path -> blob sha1
    snapshots: list = field(default_factory=list)  # {"path", "step", "t"}
    start_time: Optional[float] = None
    end_time: Optional[float] = None
    report: dict = field(default_factory=dict)

    @property
    def solver_config(self) -> SolverConfig:
        return config_from_dict(self.config)

    @property
    def directory(self) -> Path:
        return Path(self.run_dir)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def save(self):
        path = self.directory / "manifest.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(self.to_json())
        tmp.replace(path)
        return path


def load_manifest(path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        raise ConfigError(f"{path}: no manifest")
    m = RunManifest.from_json(path.read_text())
    m.run_dir = str(path.parent)
    return m


# -- streaming sink -----------------------------------------------------------


def frame_json(frame: DiagnosticsFrame) -> str:
    return json.dumps(frame.to_dict(), allow_nan=True)


def flux_lines(frame: DiagnosticsFrame):
    for Q, pi, r, h, b, ratio in frame.flux_rows():
        yield ",".join([fmt(frame.t), str(Q), fmt(pi), fmt(r), fmt(h), fmt(b), fmt(ratio)])


class RunWriter(Sink):
    """Writes a run directory as frames and snapshots arrive."""

    def __init__(self, run_dir, cfg: SolverConfig, *, append: bool = False, manifest: RunManifest = None):
        self.dir = Path(run_dir)
        (self.dir / "snapshots").mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.manifest = manifest
        mode = "a" if append else "w"
        self._diag = open(self.dir / "diagnostics.jsonl", mode, newline="\n")
        self._flux = open(self.dir / "flux.csv", mode, newline="\n")
        if not append:
            self._flux.write(",".join(FLUX_COLUMNS) + "\n")
            (self.dir / "config.txt").write_text(config_to_text(cfg))

    def on_start(self, info):
        if self.manifest is None:
            self.manifest = RunManifest(config_to_dict(self.cfg), str(self.dir), info["dt"], info["n_steps"],
                                        flags=self.cfg.flags, start_time=time.time())
        self.manifest.status = "aborted"  # until on_finish says otherwise
        self.manifest.artifacts = {"config": "config.txt", "diagnostics": "diagnostics.jsonl",
                                   "flux": "flux.csv", "snapshots": "snapshots"}
        self._sync()

    def on_frame(self, frame, field_):
        self._diag.write(frame_json(frame) + "\n")
        for line in flux_lines(frame):
            self._flux.write(line + "\n")

    def on_snapshot(self, step, t, field_):
        rel = f"snapshots/snap_{step:08d}.bin"
        write_snapshot(self.dir / rel, field_, step, t)
        self.manifest.snapshots.append({"path": rel, "step": int(step), "t": float(t)})
        self.manifest.checksums[rel] = file_sha1(self.dir / rel)
        self._sync()

    def on_finish(self, status, info):
        self.manifest.status = status
        self.manifest.end_time = time.time()
        if status in ("blown_up", "unresolved"):
            self.manifest.report = {k: v for k, v in info.items()}
        self._sync()
        self.close()

    def _sync(self):
        self._diag.flush()
        self._flux.flush()
        for rel in ("config.txt", "diagnostics.jsonl", "flux.csv"):
            self.manifest.checksums[rel] = file_sha1(self.dir / rel)
        self.manifest.save()

    def close(self):
        for fh in (self._diag, self._flux):
            if not fh.closed:
                fh.close()


def run_to_directory(cfg: SolverConfig, run_dir, *, stop_at_step=None, keep_fields=False) -> Trajectory:
    from .solver import run

    writer = RunWriter(run_dir, cfg)
    try:
        return run(cfg, [writer], stop_at_step=stop_at_step, keep_fields=keep_fields)
    finally:
        writer.close()


# -- verification and resume ----------------------------------------------------


def verify(manifest) -> list:
    """Check every checksummed artifact; raises :class:`CorruptionError` on the first mismatch."""
    m = manifest if isinstance(manifest, RunManifest) else load_manifest(manifest)
    checked = []
    for rel, digest in sorted(m.checksums.items()):
        path = m.directory / rel
        if not path.is_file():
            raise CorruptionError(path, "missing artifact")
        if file_sha1(path) != digest:
            raise CorruptionError(path, "checksum mismatch")
        checked.append(rel)
    for snap in m.snapshots:
        if snap["path"] not in m.checksums:
            raise CorruptionError(m.directory / snap["path"], "snapshot without checksum")
    return checked


def load_frames(run_dir) -> list:
    path = Path(run_dir) / "diagnostics.jsonl"
    with open(path) as fh:
        return [DiagnosticsFrame.from_dict(json.loads(line)) for line in fh if line.strip()]


def load_trajectory(manifest) -> Trajectory:
    """Frames and metadata of a stored run (fields are not loaded)."""
    m = manifest if isinstance(manifest, RunManifest) else load_manifest(manifest)
    traj = Trajectory(m.solver_config, m.dt, m.n_steps)
    traj.frames = load_frames(m.directory)
    traj.times = [fr.t for fr in traj.frames]
    traj.fields = [None] * len(traj.frames)
    traj.snapshots = [(s["step"], s["t"]) for s in m.snapshots]
    traj.status = m.status
    return traj


def resume(manifest, *, stop_at_step=None, keep_fields=False) -> Trajectory:
    """Continue an interrupted run from its last checksummed snapshot."""
    m = manifest if isinstance(manifest, RunManifest) else load_manifest(manifest)
    if m.status == "completed":
        log.warning("run in %s already completed; nothing to resume", m.directory)
        return load_trajectory(m)
    if m.status != "aborted":
        raise ConfigError(f"cannot resume a run with status {m.status!r}")
    if not m.snapshots:
        raise CorruptionError(m.directory, "no snapshot to resume from")
    last = max(m.snapshots, key=lambda s: s["step"])
    path = m.directory / last["path"]
    if not path.is_file():
        raise CorruptionError(path, "missing artifact")
    if file_sha1(path) != m.checksums.get(last["path"]):
        raise CorruptionError(path, "checksum mismatch")
    cfg = m.solver_config
    try:
        state, step, _t = read_snapshot(path, cfg.dealias_fraction)
    except GridError as exc:
        raise CorruptionError(path, str(exc)) from None
    if step != last["step"]:
        raise CorruptionError(path, f"header step {step} does not match manifest step {last['step']}")

    frames = [fr for fr in load_frames(m.directory) if fr.step <= step]
    if not frames or frames[-1].step != step:
        raise CorruptionError(m.directory / "diagnostics.jsonl", f"no frame for snapshot step {step}")
    # rewrite the streams up to the snapshot so that appending reproduces an uninterrupted run
    with open(m.directory / "diagnostics.jsonl", "w", newline="\n") as fh:
        fh.writelines(frame_json(fr) + "\n" for fr in frames)
    with open(m.directory / "flux.csv", "w", newline="\n") as fh:
        fh.write(",".join(FLUX_COLUMNS) + "\n")
        for fr in frames:
            fh.writelines(line + "\n" for line in flux_lines(fr))
    dropped = [s for s in m.snapshots if s["step"] > step]
    for s in dropped:
        m.checksums.pop(s["path"], None)
        (m.directory / s["path"]).unlink(missing_ok=True)
    m.snapshots = [s for s in m.snapshots if s["step"] <= step]

    acc = Accumulators(dissipated=frames[-1].dissipated, f_integral=frames[-1].f_integral,
                       energy0=frames[0].energy, besov0=frames[0].besov_sll,
                       last_t=frames[-1].t, last_f=frames[-1].f)
    traj = Trajectory(cfg, m.dt, m.n_steps)
    traj.frames = list(frames)
    traj.times = [fr.t for fr in frames]
    traj.fields = [None] * (len(frames) - 1) + [state]
    traj.snapshots = [(s["step"], s["t"]) for s in m.snapshots]
    writer = RunWriter(m.directory, cfg, append=True, manifest=m)
    writer.on_start({"dt": m.dt, "n_steps": m.n_steps})
    try:
        return integrate(traj, state, step, acc, [writer], stop_at_step=stop_at_step,
                         keep_fields=keep_fields, resumed=True)
    finally:
        writer.close()


# -- offline diagnostics and export ----------------------------------------------


def recompute_diagnostics(manifest) -> list:
    """Diagnostics evaluated afresh on every stored snapshot.

    The dissipated energy between snapshots is approximated with the trapezoid
    rule on the snapshot times.
    """
    m = manifest if isinstance(manifest, RunManifest) else load_manifest(manifest)
    verify(m)
    cfg = m.solver_config
    acc = Accumulators()
    frames = []
    prev = None
    for snap in sorted(m.snapshots, key=lambda s: s["step"]):
        theta, step, t = read_snapshot(m.directory / snap["path"], cfg.dealias_fraction)
        if prev is not None:
            from .diagnostics import dissipation_rate

            d = dissipation_rate(theta, cfg.alpha, cfg.kappa, cfg.epsilon)
            acc.dissipated += 0.5 * (prev[1] + d) * (t - prev[0])
        fr = diagnose(theta, cfg, step, t, acc)
        prev = (t, fr.dissipation)
        frames.append(fr)
    out = m.directory / "diagnostics_recomputed.jsonl"
    out.write_text("".join(frame_json(fr) + "\n" for fr in frames))
    return frames


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def export_plotdata(manifest, kind: str, out=None) -> Path:
    """Write a CSV for plotting; returns its path.

    Columns by kind:

    * ``energy``: step, t, energy, dissipation, dissipated, budget_residual, linf
    * ``flux``: t, Q, Pi_Q, term_rQ, term_high, bound, ratio
    * ``criterion``: step, t, Q, Lambda, resolved, f, f_integral, besov_sll, gronwall_ratio
    * ``spectrum``: step, t, then ``||theta_q||_2`` for q = -1..q_max
    """
    if kind not in EXPORT_KINDS:
        raise ValueError(f"unknown export kind {kind!r}; expected one of {EXPORT_KINDS}")
    m = manifest if isinstance(manifest, RunManifest) else load_manifest(manifest)
    frames = load_frames(m.directory)
    if kind == "energy":
        header = ["step", "t", "energy", "dissipation", "dissipated", "budget_residual", "linf"]
        rows = [[fr.step, fr.t, fr.energy, fr.dissipation, fr.dissipated, fr.budget_residual, fr.linf]
                for fr in frames]
    elif kind == "flux":
        header = list(FLUX_COLUMNS)
        rows = [[fr.t, Q, pi, r, h, b, ratio] for fr in frames for Q, pi, r, h, b, ratio in fr.flux_rows()]
    elif kind == "criterion":
        header = ["step", "t", "Q", "Lambda", "resolved", "f", "f_integral", "besov_sll", "gronwall_ratio"]
        rows = [[fr.step, fr.t, fr.Q, fr.Lambda, int(fr.resolved), fr.f, fr.f_integral, fr.besov_sll,
                 fr.gronwall_ratio] for fr in frames]
    else:
        n = len(frames[0].shell_l2) if frames else 0
        header = ["step", "t"] + [f"q{q}" if q >= 0 else "q_m1" for q in range(-1, n - 1)]
        rows = [[fr.step, fr.t] + [float(x) for x in fr.shell_l2] for fr in frames]
    path = Path(out) if out is not None else m.directory / f"plot_{kind}.csv"
    path.write_text(_csv_text(header, rows))
    return path
