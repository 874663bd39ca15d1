"""Polar encoding, BPSK/AWGN channel, and successive-cancellation decoding.

Index convention: natural order throughout (no bit-reversal).  The
encoder applies the [[1,0],[1,1]] kernel by in-place butterflies; the SC
decoder uses the exact check-node rule in its numerically safe log form
(min-sum available behind a flag).  Ties decode to bit 0.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import json
import math
import time

import numpy as np

from .errors import DomainError, ShapeError
from .network import DETERMINISTIC, NetworkModel, forward, forward_rate
from .rngtools import derive_rng

__all__ = [
    "PolarCodeSpec",
    "ChannelOutput",
    "DecodeResult",
    "construct_frozen_set",
    "polar_transform",
    "encode",
    "bpsk_awgn",
    "sc_decode",
    "neural_sc_decode",
    "ber_experiment",
    "write_ber_csv",
    "write_timing_csv",
]


@dataclass(frozen=True)
class PolarCodeSpec:
    N: int
    K: int
    frozen: np.ndarray           # bool mask, True = frozen (forced to 0)
    design_snr_db: float = 0.0

    def __post_init__(self):
        if self.N < 1 or (self.N & (self.N - 1)) != 0:
            raise DomainError(f"N must be a power of 2, got {self.N}")
        frozen = np.asarray(self.frozen, dtype=bool)
        frozen.setflags(write=False)
        object.__setattr__(self, "frozen", frozen)
        if frozen.shape != (self.N,):
            raise ShapeError("frozen mask length must equal N")
        if int(np.count_nonzero(~frozen)) != self.K:
            raise DomainError("frozen mask does not leave K information positions")

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def info_indices(self) -> np.ndarray:
        return np.nonzero(~self.frozen)[0]

    def to_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump({"N": self.N, "K": self.K,
                       "design_snr_db": self.design_snr_db,
                       "frozen_mask": self.frozen.astype(int).tolist()},
                      fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "PolarCodeSpec":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(N=doc["N"], K=doc["K"],
                   frozen=np.asarray(doc["frozen_mask"], dtype=bool),
                   design_snr_db=doc.get("design_snr_db", 0.0))


@dataclass(frozen=True)
class ChannelOutput:
    llrs: np.ndarray             # positive favors bit 0
    snr_db: float

    def __post_init__(self):
        llrs = np.asarray(self.llrs, dtype=float)
        if not np.isfinite(llrs).all():
            raise DomainError("channel LLRs must be finite")
        llrs.setflags(write=False)
        object.__setattr__(self, "llrs", llrs)


@dataclass(frozen=True)
class DecodeResult:
    u_hat: np.ndarray            # full length-N estimate, frozen positions 0
    message_hat: np.ndarray      # K information bits
    bit_errors: int | None = None


def construct_frozen_set(N: int, K: int, design_snr_db: float = 0.0) -> PolarCodeSpec:
    """Bhattacharyya BEC-surrogate construction, natural order.

    z0 = exp(-snr_linear); each polarization level maps z to the pair
    (2z - z^2, z^2); the N-K least reliable (largest-z) indices are
    frozen, ties freezing the lower index first.
    """
    if K > N:
        raise DomainError("K must not exceed N")
    if K < 0:
        raise DomainError("K must be non-negative")
    z = np.array([math.exp(-(10.0 ** (design_snr_db / 10.0)))])
    while z.size < N:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2.0 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    order = np.lexsort((np.arange(N), -z))   # by descending z, then index
    frozen = np.zeros(N, dtype=bool)
    frozen[order[:N - K]] = True
    return PolarCodeSpec(N=N, K=K, frozen=frozen, design_snr_db=design_snr_db)


def polar_transform(u) -> np.ndarray:
    """x = u F^(x)n over GF(2) via in-place butterflies (natural order)."""
    x = np.asarray(u, dtype=np.uint8).copy()
    N = x.size
    if N < 1 or (N & (N - 1)) != 0:
        raise ShapeError("transform length must be a power of 2")
    h = 1
    while h < N:
        for start in range(0, N, 2 * h):
            x[start:start + h] ^= x[start + h:start + 2 * h]
        h *= 2
    return x


def encode(message, spec: PolarCodeSpec) -> np.ndarray:
    """Place message at the non-frozen u positions and transform."""
    message = np.asarray(message, dtype=np.uint8)
    if message.shape != (spec.K,):
        raise ShapeError(f"message length must be {spec.K}")
    u = np.zeros(spec.N, dtype=np.uint8)
    u[~spec.frozen] = message
    return polar_transform(u)


def _awgn_llrs(codeword, snr_db, rate, rng):
    codeword = np.asarray(codeword, dtype=np.uint8)
    sigma2 = 1.0 / (2.0 * rate * 10.0 ** (snr_db / 10.0))
    s = 1.0 - 2.0 * codeword.astype(float)
    y = s + math.sqrt(sigma2) * rng.standard_normal(codeword.size)
    return 2.0 * y / sigma2


def bpsk_awgn(codeword, snr_db: float, seed: int, rate: float) -> ChannelOutput:
    """BPSK over AWGN at Eb/N0 = snr_db for the given code rate."""
    if rate <= 0:
        raise DomainError("code rate must be positive")
    rng = derive_rng(seed, "channel")
    return ChannelOutput(llrs=_awgn_llrs(codeword, snr_db, rate, rng),
                         snr_db=snr_db)


def _check_node(a, b, min_sum):
    if min_sum:
        return np.copysign(np.minimum(np.abs(a), np.abs(b)), a * b)
    return np.logaddexp(0.0, a + b) - np.logaddexp(a, b)


def _sc_recurse(llr, frozen, min_sum):
    n = llr.size
    if n == 1:
        if frozen[0] or llr[0] >= 0.0:
            u = np.zeros(1, dtype=np.uint8)
        else:
            u = np.ones(1, dtype=np.uint8)
        return u, u.copy()
    h = n // 2
    a, b = llr[:h], llr[h:]
    u_left, x_left = _sc_recurse(_check_node(a, b, min_sum), frozen[:h], min_sum)
    g = b + (1.0 - 2.0 * x_left.astype(float)) * a
    u_right, x_right = _sc_recurse(g, frozen[h:], min_sum)
    return (np.concatenate([u_left, u_right]),
            np.concatenate([x_left ^ x_right, x_right]))


def sc_decode(out: ChannelOutput, spec: PolarCodeSpec,
              min_sum: bool = False, truth=None) -> DecodeResult:
    """Classical successive-cancellation decoding (llr >= 0 decodes to 0)."""
    llr = np.asarray(out.llrs, dtype=float)
    if llr.shape != (spec.N,):
        raise ShapeError(f"LLR length must be {spec.N}")
    if not np.isfinite(llr).all():
        raise DomainError("LLRs must be finite")
    u_hat, _ = _sc_recurse(llr, spec.frozen, min_sum)
    message_hat = u_hat[~spec.frozen]
    errors = None
    if truth is not None:
        errors = int(np.count_nonzero(message_hat != np.asarray(truth, np.uint8)))
    return DecodeResult(u_hat=u_hat, message_hat=message_hat, bit_errors=errors)


def neural_sc_decode(out: ChannelOutput, model: NetworkModel,
                     spec: PolarCodeSpec, window: int = 64,
                     seed: int = 0, truth=None) -> DecodeResult:
    """One-shot dense decoder: llrs squashed by tanh(llr/2), forward pass,
    outputs thresholded at 0.5 (0.5 decodes to bit 0).  Stochastic-firing
    models average spikes over `window` passes before thresholding."""
    llr = np.asarray(out.llrs, dtype=float)
    if llr.shape != (spec.N,):
        raise ShapeError(f"LLR length must be {spec.N}")
    if model.input_dim != spec.N or model.output_dim != spec.K:
        raise ShapeError("model dimensions do not match the code spec")
    x = np.tanh(llr / 2.0)
    if model.activation_mode == DETERMINISTIC:
        y = forward(model, x)
    else:
        y = forward_rate(model, x, window, seed)
    message_hat = (y > 0.5).astype(np.uint8)
    u_hat = np.zeros(spec.N, dtype=np.uint8)
    u_hat[~spec.frozen] = message_hat
    errors = None
    if truth is not None:
        errors = int(np.count_nonzero(message_hat != np.asarray(truth, np.uint8)))
    return DecodeResult(u_hat=u_hat, message_hat=message_hat, bit_errors=errors)


def _ber_point(args):
    (point_index, spec, decoder, snr_db, min_frames, seed,
     model, window) = args
    bit_errors = 0
    frame_errors = 0
    decode_time = 0.0
    for frame in range(min_frames):
        rng = derive_rng(seed, "ber", point_index, frame)
        message = rng.integers(0, 2, size=spec.K).astype(np.uint8)
        codeword = encode(message, spec)
        llrs = _awgn_llrs(codeword, snr_db, spec.rate, rng)
        out = ChannelOutput(llrs=llrs, snr_db=snr_db)
        t0 = time.perf_counter()
        if decoder == "classical":
            res = sc_decode(out, spec)
        elif decoder == "neural":
            frame_seed = int(rng.integers(0, 2 ** 63))
            res = neural_sc_decode(out, model, spec, window=window,
                                   seed=frame_seed)
        else:
            raise DomainError(f"unknown decoder {decoder!r}")
        decode_time += time.perf_counter() - t0
        errs = int(np.count_nonzero(res.message_hat != message))
        bit_errors += errs
        frame_errors += errs > 0
    return point_index, {
        "snr_db": snr_db,
        "frames": min_frames,
        "bit_errors": bit_errors,
        "frame_errors": frame_errors,
        "ber": bit_errors / (min_frames * spec.K),
        "fer": frame_errors / min_frames,
        "mean_decode_us": 1e6 * decode_time / min_frames,
    }


def ber_experiment(spec: PolarCodeSpec, decoder: str, snr_list, min_frames: int,
                   seed: int, model: NetworkModel | None = None,
                   window: int = 64, workers: int = 1) -> list:
    """Monte Carlo BER/FER per SNR point; rows ordered like snr_list.

    Every frame draws its message and noise from a dedicated substream of
    (seed, point index, frame index), so results do not depend on worker
    count or scheduling.
    """
    if min_frames < 1:
        raise DomainError("min_frames must be >= 1")
    if decoder == "neural" and model is None:
        raise DomainError("neural decoding requires a trained model")
    jobs = [(i, spec, decoder, snr, min_frames, seed, model, window)
            for i, snr in enumerate(snr_list)]
    rows = [None] * len(jobs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, row in pool.map(_ber_point, jobs):
                rows[idx] = row
    else:
        for job in jobs:
            idx, row = _ber_point(job)
            rows[idx] = row
    return rows


def write_ber_csv(rows, path):
    """Deterministic results table (timing goes to the sidecar file)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("snr_db,frames,bit_errors,frame_errors,ber,fer\n")
        for r in rows:
            fh.write(f"{float(r['snr_db'])!r},{r['frames']},{r['bit_errors']},"
                     f"{r['frame_errors']},{float(r['ber'])!r},{float(r['fer'])!r}\n")


def write_timing_csv(rows, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("snr_db,mean_decode_us\n")
        for r in rows:
            fh.write(f"{float(r['snr_db'])!r},{float(r['mean_decode_us'])!r}\n")
