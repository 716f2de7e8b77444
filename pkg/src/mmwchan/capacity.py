"""Per-subcarrier frequency responses and wideband log-det capacity.

The band is split into uniform narrowband subcarriers on a baseband grid
[-BW/2, +BW/2); the capacity integral is discretized as the uniform mean of
log2 det(I + (rho/N_t) H_f H_f^H) over those subcarriers. Monte Carlo drops
are embarrassingly parallel: every drop derives its own RNG stream from
(master_seed, drop_index), so results are identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cirgen import CirGenConfig, generate_initial_cir
from .core import (
    ArrayGeometry,
    AutocorrParams,
    ChannelImpulseResponse,
    FadingModel,
    Scenario,
    db_to_linear,
    lookup_default_params,
)
from .spatial import (
    build_amplitude_matched_corr,
    matrix_sqrt_psd,
    realize_taps,
)


@dataclass(frozen=True)
class CapacityConfig:
    """Wideband simulation settings; center frequency is metadata only."""

    bandwidth_hz: float = 800e6
    num_subcarriers: int = 100
    snr_db: float = 10.0
    center_frequency_hz: float = 28e9

    def __post_init__(self) -> None:
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")

    @property
    def f_min(self) -> float:
        return self.center_frequency_hz - self.bandwidth_hz / 2.0

    @property
    def f_max(self) -> float:
        return self.center_frequency_hz + self.bandwidth_hz / 2.0

    def baseband_frequencies(self) -> np.ndarray:
        """Uniform subcarrier grid over [-BW/2, +BW/2)."""
        n = self.num_subcarriers
        step = self.bandwidth_hz / n
        return -self.bandwidth_hz / 2.0 + step * np.arange(n)


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    """Channel matrices at each subcarrier: (num_subcarriers, N_r, N_t)."""

    per_subcarrier: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.per_subcarrier, dtype=complex)
        if m.ndim != 3:
            raise ValueError("per_subcarrier must be (num_subcarriers, N_r, N_t)")
        if not np.all(np.isfinite(m.view(float))):
            raise ValueError("frequency response entries must be finite")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "per_subcarrier", m)

    @property
    def num_subcarriers(self) -> int:
        return self.per_subcarrier.shape[0]


@dataclass(frozen=True)
class CapacitySample:
    """One Monte Carlo drop's wideband capacity in bits/s/Hz."""

    capacity: float
    drop_index: int
    seed: int

    def __post_init__(self) -> None:
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0")


def frequency_response(taps, config: CapacityConfig) -> FrequencyResponse:
    """DFT of the tapped delay line onto the subcarrier grid.

    H_f(f_n) = sum_l M_l * exp(-j*2*pi*f_n*tau_l), with tau_l the excess
    delay from the first tap.
    """
    taps = list(taps)
    if not taps:
        raise ValueError("need at least one tap")
    t0 = taps[0].delay
    tau = np.array([t.delay - t0 for t in taps])
    stack = np.stack([t.matrix for t in taps])  # (L, N_r, N_t)
    f = config.baseband_frequencies()
    phase = np.exp(-2j * np.pi * np.outer(f, tau))  # (N, L)
    hf = np.tensordot(phase, stack, axes=(1, 0))  # (N, N_r, N_t)
    return FrequencyResponse(per_subcarrier=hf)


def wideband_capacity(fr: FrequencyResponse, config: CapacityConfig, n_t: int) -> float:
    """Mean over subcarriers of log2 det(I + (rho/N_t) H H^H), rho linear
    from config.snr_db. Uses the smaller Gram (Sylvester) for the det."""
    hf = fr.per_subcarrier
    n_r = hf.shape[1]
    if hf.shape[2] != n_t:
        raise ValueError(f"frequency response has N_t={hf.shape[2]}, expected {n_t}")
    rho = db_to_linear(config.snr_db)
    scale = rho / n_t
    if n_t <= n_r:
        gram = np.einsum("fij,fik->fjk", hf.conj(), hf)
        dim = n_t
    else:
        gram = np.einsum("fik,fjk->fij", hf, hf.conj())
        dim = n_r
    m = np.eye(dim)[None, :, :] + scale * gram
    _, logdet = np.linalg.slogdet(m)
    cap = float(np.mean(logdet) / math.log(2.0))
    return max(cap, 0.0)


def _drop_seed_sequence(master_seed: int, drop_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(0, drop_index))


def _shared_cir_rng(master_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=(1, 0)))


def _simulate_drops(args) -> list[CapacitySample]:
    (
        drop_indices,
        scenario,
        gen_config,
        rx_geometry,
        tx_geometry,
        fading,
        cap_config,
        master_seed,
        params,
        shared_cir,
    ) = args
    # The amplitude-matched pipeline matrices are deterministic; hoist them.
    rr = build_amplitude_matched_corr(params, rx_geometry, FadingModel.rayleigh(), side="receive")
    rt = build_amplitude_matched_corr(params, tx_geometry, FadingModel.rayleigh(), side="transmit")
    rr_sqrt = matrix_sqrt_psd(rr)
    rt_sqrt = matrix_sqrt_psd(rt)
    out = []
    for drop in drop_indices:
        ss = _drop_seed_sequence(master_seed, drop)
        rng = np.random.default_rng(ss)
        cir = shared_cir if shared_cir is not None else generate_initial_cir(gen_config, scenario, rng)
        taps = realize_taps(cir, rr_sqrt, rt_sqrt, fading, rng)
        fr = frequency_response(taps, cap_config)
        cap = wideband_capacity(fr, cap_config, tx_geometry.num_elements)
        seed_word = int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])
        out.append(CapacitySample(capacity=cap, drop_index=drop, seed=seed_word))
    return out


def run_monte_carlo(
    scenario: Scenario,
    gen_config: CirGenConfig,
    rx_geometry: ArrayGeometry,
    tx_geometry: ArrayGeometry,
    fading: FadingModel,
    cap_config: CapacityConfig,
    num_drops: int,
    master_seed: int,
    autocorr_params: AutocorrParams | None = None,
    share_initial_cir: bool = False,
    initial_cir: ChannelImpulseResponse | None = None,
    num_workers: int = 1,
) -> list[CapacitySample]:
    """Monte Carlo capacity campaign.

    Each drop generates an initial CIR, or reuses one fixed CIR when
    ``share_initial_cir`` is set or an ``initial_cir`` (e.g. an imported
    one) is given; the drop then realizes spatially correlated local-area
    taps and evaluates the wideband capacity. ``autocorr_params=None`` uses
    the scenario's table defaults. Fully reproducible from ``master_seed``
    regardless of ``num_workers``.
    """
    if num_drops < 1:
        raise ValueError("num_drops must be >= 1")
    params = autocorr_params
    if params is None:
        defaults = lookup_default_params(scenario)
        if defaults.autocorr is None:
            raise ValueError(
                f"no fitted autocorrelation parameters for scenario "
                f"{scenario.label()!r}; pass autocorr_params explicitly"
            )
        params = defaults.autocorr

    shared_cir = initial_cir
    if shared_cir is None and share_initial_cir:
        shared_cir = generate_initial_cir(gen_config, scenario, _shared_cir_rng(master_seed))

    def task(indices):
        return (
            indices,
            scenario,
            gen_config,
            rx_geometry,
            tx_geometry,
            fading,
            cap_config,
            master_seed,
            params,
            shared_cir,
        )

    all_indices = list(range(num_drops))
    if num_workers <= 1 or num_drops == 1:
        samples = _simulate_drops(task(all_indices))
    else:
        chunks = [all_indices[i::num_workers] for i in range(num_workers)]
        chunks = [c for c in chunks if c]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = pool.map(_simulate_drops, [task(c) for c in chunks])
            samples = [s for chunk in results for s in chunk]
    samples.sort(key=lambda s: s.drop_index)
    return samples


def capacity_cdf(samples):
    """Empirical CDF of capacity samples: sorted (capacity, rank/N) arrays."""
    caps = np.array([s.capacity for s in samples], dtype=float)
    if caps.size < 1:
        raise ValueError("need at least one capacity sample")
    order = np.sort(caps)
    probs = np.arange(1, caps.size + 1) / caps.size
    return order, probs


def capacity_quantiles(samples, qs=(0.1, 0.5, 0.9)):
    """Selected quantiles of the capacity samples (linear interpolation)."""
    caps = np.array([s.capacity for s in samples], dtype=float)
    return {q: float(np.quantile(caps, q)) for q in qs}
