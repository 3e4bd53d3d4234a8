"""Experiment runner: throughput CDFs, AP sweeps, noise budget and the
CSV/manifest outputs behind the command-line interface."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel import OtfsGrid, sample_all_paths, stack_variances
from .estimation import compute_link_stats, plan_pilots
from .geometry import NetworkConfig, apply_shadowing, place_network
from .rate import (achievable_rate, equal_power_control, power_constraint_load,
                   rate_distinct_delays)
from .rng import substream

BOLTZMANN_J_PER_K = 1.381e-23
NOISE_TEMPERATURE_K = 290.0

_MODE_IDS = {"uncorr": 0, "corr": 1}
_MODE_NAMES = {"uncorr": "uncorrelated", "corr": "correlated"}


def noise_power_w(grid: OtfsGrid, noise_figure_db: float) -> float:
    """Receiver noise power in watts over the full bandwidth M*delta_f."""
    if noise_figure_db < 0:
        raise ValueError("noise figure must be non-negative")
    return (BOLTZMANN_J_PER_K * NOISE_TEMPERATURE_K * grid.bandwidth_hz
            * 10.0 ** (noise_figure_db / 10.0))


def noise_power_dbm(grid: OtfsGrid, noise_figure_db: float) -> float:
    return 10.0 * np.log10(noise_power_w(grid, noise_figure_db) * 1000.0)


@dataclass
class ChannelParams:
    """Per-link path sampling parameters."""

    n_paths: int = 5
    l_max: int = 2
    k_max: int = 3
    k_hat: int = 1
    fractional: bool = True
    power_profile: str = "uniform"
    distinct_delays: bool = False


@dataclass
class PowerParams:
    """Transmit powers in watts and the receiver noise figure; the rate
    expressions consume them normalized by the noise power."""

    down_w: float = 1.0
    up_w: float = 0.2
    pilot_w: float = 1.0
    noise_figure_db: float = 9.0

    def __post_init__(self):
        if min(self.down_w, self.up_w, self.pilot_w) <= 0:
            raise ValueError("transmit powers must be positive")


@dataclass
class ExperimentConfig:
    network: NetworkConfig
    grid: OtfsGrid
    channel: ChannelParams = field(default_factory=ChannelParams)
    powers: PowerParams = field(default_factory=PowerParams)
    realizations: int = 200
    seed: int = 0
    shadowing: str = "uncorr"  # "corr" | "uncorr" | "both"
    ap_counts: list = field(default_factory=list)
    user_counts: list = field(default_factory=list)
    workers: int = 1

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if self.shadowing not in ("corr", "uncorr", "both"):
            raise ValueError(f"unknown shadowing request {self.shadowing!r}")

    @property
    def modes(self) -> list:
        return ["uncorr", "corr"] if self.shadowing == "both" else [self.shadowing]


def desk_preset(**overrides) -> ExperimentConfig:
    """Small configuration for fast local runs and CI."""
    cfg = ExperimentConfig(
        network=NetworkConfig(num_aps=8, num_users=4),
        grid=OtfsGrid(doppler_bins=4, delay_bins=8),
        channel=ChannelParams(n_paths=3, l_max=2, k_max=0, k_hat=0),
        realizations=50,
        ap_counts=[4, 8, 12],
        user_counts=[2, 4],
    )
    return replace(cfg, **overrides)


def paper_preset(**overrides) -> ExperimentConfig:
    """Full-scale configuration: 30x20 grid, 40 APs, 20 users, 200
    realizations, five-path links with fractional Doppler."""
    cfg = ExperimentConfig(
        network=NetworkConfig(num_aps=40, num_users=20),
        grid=OtfsGrid(doppler_bins=20, delay_bins=30),
        channel=ChannelParams(),
        realizations=200,
        ap_counts=[10, 20, 30, 40, 50],
        user_counts=[20, 40],
    )
    return replace(cfg, **overrides)


PRESETS = {"desk": desk_preset, "paper": paper_preset}


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    return ExperimentConfig(
        network=NetworkConfig(**data.pop("network")),
        grid=OtfsGrid(**data.pop("grid")),
        channel=ChannelParams(**data.pop("channel", {})),
        powers=PowerParams(**data.pop("powers", {})),
        **data,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def normalized_powers(powers: PowerParams, grid: OtfsGrid):
    """(rho_d, rho_u, rho_p): transmit powers over the noise power."""
    sigma2 = noise_power_w(grid, powers.noise_figure_db)
    return powers.down_w / sigma2, powers.up_w / sigma2, powers.pilot_w / sigma2


def realize_user_rates(config: ExperimentConfig, n_aps: int, n_users: int,
                       mode: str, rng):
    """One network realization: placement, shadowing, path sampling,
    estimation statistics, power control and the per-user closed-form
    rate. Returns (rates, throughputs) arrays of length n_users."""
    net = replace(config.network, num_aps=n_aps, num_users=n_users,
                  shadowing_mode=_MODE_NAMES[mode])
    grid, ch = config.grid, config.channel
    layout = apply_shadowing(place_network(net, rng), net, rng)
    pathsets = sample_all_paths(
        layout.beta_pair, ch.n_paths, ch.l_max, ch.k_max, grid, rng,
        fractional=ch.fractional, power_profile=ch.power_profile,
        distinct_delays=ch.distinct_delays)
    rho_d, rho_u, rho_p = normalized_powers(config.powers, grid)
    plan = plan_pilots(n_users, grid, ch.l_max, ch.k_max, ch.k_hat,
                       pilot_power=rho_p, mode="shared")
    stats = compute_link_stats(stack_variances(pathsets), plan, rho_u, grid)
    pc = equal_power_control(stats)
    load = power_constraint_load(stats, pc)
    if np.max(np.abs(load - 1.0)) > 1e-12:
        raise RuntimeError("per-AP power constraint violated: "
                           f"max deviation {np.max(np.abs(load - 1.0)):.3e}")
    rate_fn = rate_distinct_delays if ch.distinct_delays else achievable_rate
    rates = np.empty(n_users)
    tputs = np.empty(n_users)
    for q in range(n_users):
        report = rate_fn(q, stats, pc, pathsets, rho_d, grid)
        rates[q] = report.rate_bps_hz
        tputs[q] = report.throughput_bps
    return rates, tputs


def _realization_task(args):
    config, n_aps, n_users, mode, index = args
    rng = substream(config.seed, _MODE_IDS[mode], n_aps, n_users, index)
    rates, tputs = realize_user_rates(config, n_aps, n_users, mode, rng)
    return index, rates, tputs


@dataclass
class CdfTable:
    """Pooled per-user throughput samples of one (mode, size) run."""

    mode: str
    n_aps: int
    n_users: int
    realization: np.ndarray
    user: np.ndarray
    rate: np.ndarray  # bit/s/Hz
    throughput: np.ndarray  # bit/s

    def cdf(self):
        """Empirical CDF support points and probabilities."""
        x = np.sort(self.throughput)
        return x, np.arange(1, len(x) + 1) / len(x)

    def summary(self):
        """(median, 5th percentile) of the throughput samples."""
        return summary_stats(self.throughput)


def summary_stats(samples):
    """Median and 5th percentile ("95%-likely" value) with linear
    interpolation between order statistics."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no samples")
    median, p5 = np.percentile(samples, [50.0, 5.0], method="linear")
    return float(median), float(p5)


def run_point(config: ExperimentConfig, n_aps: int, n_users: int,
              mode: str) -> CdfTable:
    """All realizations of one (mode, M_a, K_u) point.

    Realizations use substreams keyed by their index, so the output is
    identical whether they run serially or across worker processes;
    results are ordered by realization index either way.
    """
    tasks = [(config, n_aps, n_users, mode, i)
             for i in range(config.realizations)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_realization_task, tasks, chunksize=4))
    else:
        results = [_realization_task(t) for t in tasks]
    results.sort(key=lambda item: item[0])
    realization = np.repeat([i for i, _, _ in results], n_users)
    user = np.tile(np.arange(n_users), len(results))
    rate = np.concatenate([r for _, r, _ in results])
    tput = np.concatenate([t for _, _, t in results])
    return CdfTable(mode=mode, n_aps=n_aps, n_users=n_users,
                    realization=realization, user=user, rate=rate,
                    throughput=tput)


def run_cdf(config: ExperimentConfig) -> list:
    """Per-user throughput CDF tables, one per requested shadowing mode."""
    return [run_point(config, config.network.num_aps,
                      config.network.num_users, mode)
            for mode in config.modes]


def run_vs_aps(config: ExperimentConfig, ap_counts=None, user_counts=None) -> list:
    """Mean per-user throughput for each (mode, K_u, M_a) sweep point.

    Returns dict rows ready for CSV emission, ordered by mode, user count
    and AP count.
    """
    if ap_counts is None:
        ap_counts = config.ap_counts or [config.network.num_aps]
    if user_counts is None:
        user_counts = config.user_counts or [config.network.num_users]
    ap_counts, user_counts = list(ap_counts), list(user_counts)
    if not ap_counts or not user_counts:
        raise ValueError("ap_counts and user_counts must not be empty")
    rows = []
    for mode in config.modes:
        for n_users in user_counts:
            for n_aps in ap_counts:
                table = run_point(config, n_aps, n_users, mode)
                median, p5 = table.summary()
                rows.append({
                    "mode": mode,
                    "n_aps": n_aps,
                    "n_users": n_users,
                    "realizations": config.realizations,
                    "mean_rate_bps_hz": float(table.rate.mean()),
                    "mean_throughput_mbps": float(table.throughput.mean() / 1e6),
                    "median_throughput_mbps": median / 1e6,
                    "p5_throughput_mbps": p5 / 1e6,
                })
    return rows


# ---------------------------------------------------------------------------
# Output plumbing

CDF_HEADER = ["mode", "realization", "user", "rate_bps_hz", "throughput_mbps"]
SWEEP_HEADER = ["mode", "n_aps", "n_users", "realizations", "mean_rate_bps_hz",
                "mean_throughput_mbps", "median_throughput_mbps",
                "p5_throughput_mbps"]


def cdf_csv_bytes(tables: list) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CDF_HEADER)
    for table in tables:
        for i in range(len(table.throughput)):
            writer.writerow([table.mode, int(table.realization[i]),
                             int(table.user[i]), repr(float(table.rate[i])),
                             repr(float(table.throughput[i] / 1e6))])
    return buf.getvalue().encode()


def sweep_csv_bytes(rows: list) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow([row["mode"], row["n_aps"], row["n_users"],
                         row["realizations"],
                         repr(row["mean_rate_bps_hz"]),
                         repr(row["mean_throughput_mbps"]),
                         repr(row["median_throughput_mbps"]),
                         repr(row["p5_throughput_mbps"])])
    return buf.getvalue().encode()


def git_blob_sha1(data: bytes) -> str:
    """Content hash the way git hashes a blob."""
    h = hashlib.sha1()
    h.update(b"blob %d\x00" % len(data))
    h.update(data)
    return h.hexdigest()


def write_run(out_path, csv_data: bytes, command: str,
              config: ExperimentConfig, started: float) -> str:
    """Write the CSV and its JSON run manifest; returns the manifest path."""
    out_path = str(out_path)
    with open(out_path, "wb") as fh:
        fh.write(csv_data)
    manifest = {
        "command": command,
        "config": config_to_dict(config),
        "output": out_path,
        "content_sha1": git_blob_sha1(csv_data),
        "wall_time_s": time.time() - started,
    }
    manifest_path = out_path + ".manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path
