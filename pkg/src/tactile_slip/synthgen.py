"""Seeded synthetic 24-channel tactile trials with ground-truth slip onsets.

Signal model, per trial:

* hold phase: contacted SG channels sit at a grasp offset with a slow linear
  drift; PVDF channels carry noise only;
* slip phase (``slide_distance_mm / velocity`` seconds): contacted SG channels
  ramp with slope proportional to ``friction_gain * velocity``; contacted PVDF
  channels ring with a damped sinusoid at onset, and materials with
  ``continuous_burst`` keep emitting Poisson-timed bursts at a rate
  proportional to ``roughness * velocity``. Burst amplitudes scale with
  velocity;
* incipient phase (the last ``incipient_s`` before onset): SG channels
  accelerate smoothly into their slip slope and PVDF channels may show small
  micro-slip precursor bursts, more often on rough, high-friction surfaces;
* channels outside the per-trial contact mask carry noise only.

Magnitudes are arbitrary units.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from tactile_slip.errors import ConfigError
from tactile_slip.tactile_data import (
    Kind, SegmentAnnotation, TactileTrial, default_channels, save_trial,
)

REFERENCE_VELOCITY = 20.0


@dataclass(frozen=True)
class MaterialParams:
    name: str
    roughness: float
    friction_gain: float
    burst_carrier_hz: float
    burst_decay_s: float
    continuous_burst: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.roughness <= 1.0:
            raise ConfigError(f"{self.name}: roughness must be in [0, 1]")
        if not self.friction_gain > 0:
            raise ConfigError(f"{self.name}: friction_gain must be > 0")
        if not 100.0 <= self.burst_carrier_hz <= 400.0:
            raise ConfigError(f"{self.name}: burst_carrier_hz must be in [100, 400]")
        if not self.burst_decay_s > 0:
            raise ConfigError(f"{self.name}: burst_decay_s must be > 0")


@dataclass(frozen=True)
class GenConfig:
    sample_rate_hz: float = 2000.0
    velocities_mm_s: tuple[float, ...] = (20.0, 40.0, 60.0)
    trials_per_case: int = 28
    contact_mask_prob: float = 0.7
    noise_sg: float = 0.01
    noise_pvdf: float = 0.01
    seed: int = 7
    grasp_offset: float = 1.0
    sg_slope_base: float = 0.2          # unit/s per unit friction_gain at 20 mm/s
    sg_drift_std: float = 0.01          # unit/s
    burst_amp_base: float = 0.5         # at 20 mm/s
    burst_rate_per_mm: float = 1.0      # ongoing bursts per mm of travel per unit roughness
    slide_distance_mm: float = 100.0
    hold_min_s: float = 1.5
    hold_max_s: float = 2.5
    pause_s: float = 2.0
    tail_s: float = 0.5
    incipient_s: float = 0.1
    precursor_rate_hz: float = 6.0      # per unit roughness * friction_gain, incipient phase only
    precursor_amp: float = 0.3          # relative to the onset burst

    def __post_init__(self) -> None:
        object.__setattr__(self, "velocities_mm_s", tuple(float(v) for v in self.velocities_mm_s))
        if not 0.0 <= self.contact_mask_prob <= 1.0:
            raise ConfigError("contact_mask_prob must be in [0, 1]")
        if self.trials_per_case < 1:
            raise ConfigError("trials_per_case must be >= 1")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be > 0")
        if not 1.0 <= self.hold_min_s <= self.hold_max_s:
            raise ConfigError("need 1 <= hold_min_s <= hold_max_s")
        if not 0.0 <= self.incipient_s < self.hold_min_s:
            raise ConfigError("incipient_s must be in [0, hold_min_s)")
        if any(v <= 0 for v in self.velocities_mm_s):
            raise ConfigError("velocities must be > 0")


def default_materials() -> tuple[list[MaterialParams], list[MaterialParams]]:
    """Six training materials (two rough, continuously bursting) and four unseen ones."""
    training = [
        MaterialParams("M1_ABS", 0.70, 1.00, 120.0, 0.060, True),
        MaterialParams("M2_aluminum_foil", 0.15, 0.80, 110.0, 0.100, False),
        MaterialParams("M3_fiberglass_aluminum_foil", 0.25, 1.10, 130.0, 0.120, False),
        MaterialParams("M4_oil_paper", 0.20, 0.90, 100.0, 0.080, False),
        MaterialParams("M5_acrylic", 0.10, 1.20, 140.0, 0.100, False),
        MaterialParams("M6_PVC", 0.80, 1.30, 115.0, 0.050, True),
    ]
    unseen = [
        MaterialParams("U1_wood", 0.60, 1.15, 125.0, 0.070, True),
        MaterialParams("U2_iron", 0.12, 1.40, 150.0, 0.090, False),
        MaterialParams("U3_copper", 0.18, 0.85, 105.0, 0.110, False),
        MaterialParams("U4_cloth", 0.90, 1.50, 100.0, 0.040, True),
    ]
    return training, unseen


def derive_seed(*keys: int | str) -> int:
    ints = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys]
    return int(np.random.SeedSequence(ints).generate_state(1, dtype=np.uint64)[0])


def _damped_burst(out: np.ndarray, t0: float, amp: np.ndarray, carrier: float, decay: float,
                  fs: float) -> None:
    """Add ``amp * exp(-(t-t0)/decay) * sin(2 pi f (t-t0))`` in place (columns = channels)."""
    n = out.shape[0]
    i0 = int(np.ceil(t0 * fs))
    if i0 >= n:
        return
    i1 = min(n, i0 + int(np.ceil(10 * decay * fs)) + 1)
    tau = np.arange(i0, i1) / fs - t0
    wave = np.exp(-tau / decay) * np.sin(2 * np.pi * carrier * tau)
    out[i0:i1] += wave[:, None] * amp[None, :]


def _travel(t: np.ndarray, onset: float, slip_dur: float, incipient_s: float) -> np.ndarray:
    """Equivalent sliding time: zero before the incipient phase, quadratic through it,
    linear during slip, frozen after the slip ends."""
    out = np.clip(t - onset, 0.0, slip_dur)
    if incipient_s > 0:
        # velocity ramps 0 -> 1 over [onset - incipient_s, onset]; C1-continuous at onset
        u = np.clip(t - (onset - incipient_s), 0.0, incipient_s)
        pre = u ** 2 / (2 * incipient_s)
        out = out + np.where(t < onset, pre, incipient_s / 2)
    return out


def _render(material: MaterialParams, schedule: Sequence[tuple[float, float]],
            duration_s: float, config: GenConfig, rng: np.random.Generator) -> np.ndarray:
    """Samples for one trial; ``schedule`` lists (onset_s, velocity) per slip segment."""
    fs = config.sample_rate_hz
    if material.burst_carrier_hz >= fs / 2:
        raise ConfigError(
            f"{material.name}: carrier {material.burst_carrier_hz} Hz at or above Nyquist {fs / 2}")
    channels = default_channels()
    sg = np.array([c.kind is Kind.SG for c in channels])
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs

    contact = rng.random(len(channels)) < config.contact_mask_prob
    gain = rng.uniform(0.5, 1.5, len(channels))
    offset = config.grasp_offset * rng.uniform(0.5, 1.5, len(channels))
    drift = rng.normal(0.0, config.sg_drift_std, len(channels))
    delay = rng.uniform(0.0, 0.005, len(channels))
    carrier = material.burst_carrier_hz * rng.uniform(0.95, 1.05)

    x = np.zeros((n, len(channels)))
    sg_on = sg & contact
    pv_on = ~sg & contact
    x[:, sg_on] = offset[sg_on] + np.outer(t, drift[sg_on])

    pv_idx = np.flatnonzero(pv_on)
    for onset, velocity in schedule:
        scale = velocity / REFERENCE_VELOCITY
        slip_dur = config.slide_distance_mm / velocity
        slope = config.sg_slope_base * material.friction_gain * scale * gain[sg_on]
        x[:, sg_on] += np.outer(_travel(t, onset, slip_dur, config.incipient_s), slope)

        if pv_idx.size == 0:
            continue
        pv = np.zeros((n, pv_idx.size))
        for j, ch in enumerate(pv_idx):
            amp = np.zeros(pv_idx.size)
            amp[j] = config.burst_amp_base * scale * gain[ch]
            _damped_burst(pv, onset + delay[ch], amp, carrier, material.burst_decay_s, fs)
        if config.incipient_s > 0:
            rate = config.precursor_rate_hz * material.roughness * material.friction_gain
            for tb in np.sort(rng.uniform(onset - config.incipient_s, onset,
                                          rng.poisson(rate * config.incipient_s))):
                amp = (config.burst_amp_base * config.precursor_amp * scale
                       * rng.uniform(0.3, 1.0) * gain[pv_idx])
                _damped_burst(pv, tb, amp, carrier, material.burst_decay_s / 2, fs)
        if material.continuous_burst and material.roughness > 0:
            rate = material.roughness * velocity * config.burst_rate_per_mm
            n_bursts = rng.poisson(rate * slip_dur)
            times = np.sort(rng.uniform(onset, onset + slip_dur, n_bursts))
            for tb in times:
                amp = config.burst_amp_base * scale * rng.uniform(0.3, 1.0) * gain[pv_idx]
                _damped_burst(pv, tb, amp, carrier, material.burst_decay_s, fs)
        x[:, pv_idx] += pv

    noise_std = np.where(sg, config.noise_sg, config.noise_pvdf)
    x += rng.standard_normal((n, len(channels))) * noise_std
    return x


def gen_trial(material: MaterialParams, velocity: float, config: GenConfig = GenConfig(),
              trial_seed: int = 0, trial_id: str = "") -> TactileTrial:
    """One hold-then-slip trial at a single velocity."""
    rng = np.random.default_rng(trial_seed)
    onset = float(np.round(rng.uniform(config.hold_min_s, config.hold_max_s) * config.sample_rate_hz)
                  / config.sample_rate_hz)
    slip_dur = config.slide_distance_mm / velocity
    end = onset + slip_dur
    x = _render(material, [(onset, velocity)], end + config.tail_s, config, rng)
    return TactileTrial(material.name, config.sample_rate_hz, default_channels(), x,
                        (SegmentAnnotation(float(velocity), onset, end),), trial_id)


def gen_cycle(material: MaterialParams, config: GenConfig = GenConfig(), trial_seed: int = 0,
              trial_id: str = "") -> TactileTrial:
    """Hold, then one slide per configured velocity separated by pauses (one continuous trial)."""
    rng = np.random.default_rng(trial_seed)
    fs = config.sample_rate_hz
    t = float(np.round(rng.uniform(config.hold_min_s, config.hold_max_s) * fs) / fs)
    schedule, segments = [], []
    for i, v in enumerate(config.velocities_mm_s):
        if i:
            t += config.pause_s
        end = t + config.slide_distance_mm / v
        schedule.append((t, v))
        segments.append(SegmentAnnotation(v, t, end))
        t = end
    x = _render(material, schedule, t + config.tail_s, config, rng)
    return TactileTrial(material.name, fs, default_channels(), x, tuple(segments), trial_id)


def corpus_plan(materials: Sequence[MaterialParams], config: GenConfig,
                mode: str = "single") -> list[tuple[str, MaterialParams, float | None, int]]:
    """(trial_id, material, velocity, trial_seed) for every trial, in corpus order."""
    if not materials:
        raise ConfigError("at least one material required")
    plan = []
    for mat in materials:
        if mode == "single":
            for v in config.velocities_mm_s:
                for k in range(config.trials_per_case):
                    tid = f"{mat.name}_v{v:g}_t{k:02d}"
                    plan.append((tid, mat, v, derive_seed(config.seed, mat.name, int(v * 1000), k)))
        elif mode == "cycle":
            for k in range(config.trials_per_case):
                tid = f"{mat.name}_cycle_t{k:02d}"
                plan.append((tid, mat, None, derive_seed(config.seed, mat.name, "cycle", k)))
        else:
            raise ConfigError(f"unknown corpus mode {mode!r}")
    return plan


def cycle_set(materials: Sequence[MaterialParams], n_trials: int,
              config: GenConfig = GenConfig()) -> list[TactileTrial]:
    """``n_trials`` cycle trials, materials taken round-robin.

    Trial ids and seeds coincide with ``corpus_plan(..., mode="cycle")``.
    """
    if not materials:
        raise ConfigError("at least one material required")
    out = []
    for i in range(n_trials):
        mat, k = materials[i % len(materials)], i // len(materials)
        out.append(gen_cycle(mat, config, derive_seed(config.seed, mat.name, "cycle", k),
                             f"{mat.name}_cycle_t{k:02d}"))
    return out


def iter_corpus(materials: Sequence[MaterialParams], config: GenConfig = GenConfig(),
                mode: str = "single") -> Iterator[TactileTrial]:
    for tid, mat, v, seed in corpus_plan(materials, config, mode):
        if v is None:
            yield gen_cycle(mat, config, seed, tid)
        else:
            yield gen_trial(mat, v, config, seed, tid)


def gen_corpus(materials: Sequence[MaterialParams], config: GenConfig = GenConfig(),
               mode: str = "single") -> list[TactileTrial]:
    return list(iter_corpus(materials, config, mode))


# ----------------------------------------------------------------------- on disk

def material_to_json(m: MaterialParams) -> dict:
    return asdict(m)


def save_registry(materials: Sequence[MaterialParams], path: str | Path) -> None:
    Path(path).write_text(json.dumps([material_to_json(m) for m in materials], indent=1) + "\n",
                          encoding="utf-8")


def load_registry(path: str | Path) -> list[MaterialParams]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [MaterialParams(**d) for d in data]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_corpus(trials: Iterator[TactileTrial] | Sequence[TactileTrial], out_dir: str | Path,
                 materials: Sequence[MaterialParams], config: GenConfig,
                 mode: str = "single") -> dict:
    """Write trial pairs, ``materials.json`` and ``manifest.json``; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_registry(materials, out / "materials.json")
    entries = []
    for trial in trials:
        meta_path, csv_path = save_trial(trial, out / trial.trial_id)
        entries.append({"trial_id": trial.trial_id, "material_id": trial.material_id,
                        "meta": meta_path.name, "samples": csv_path.name,
                        "sha256": {meta_path.name: sha256_file(meta_path),
                                   csv_path.name: sha256_file(csv_path)}})
    manifest = {"format_version": 1, "mode": mode, "config": gen_config_to_json(config),
                "registry_sha256": sha256_file(out / "materials.json"), "trials": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return manifest


def gen_config_to_json(config: GenConfig) -> dict:
    d = asdict(config)
    d["velocities_mm_s"] = list(config.velocities_mm_s)
    return d
