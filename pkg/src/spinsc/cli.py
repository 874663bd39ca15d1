"""Command-line harness tying the modules into reproducible experiments.

Every run resolves its configuration (file + environment overrides),
derives all randomness from one master seed, writes its data files
atomically, and emits a manifest from which the run can be repeated
bit-exactly with `spinsc rerun <manifest>` (wall-clock duration aside).
"""

import argparse
from contextlib import contextmanager
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import bitstream, mtj, polar, training
from .config import ConfigView, load_config
from .errors import ConfigError, FitDomainError, SpinscError
from .llgs import DeviceParams, default_device_params
from .network import save_model, load_model
from .rngtools import derive_rng

MANIFEST_NAME = "manifest.json"


@contextmanager
def atomic_path(final_path):
    """Yield a temp path that is renamed onto final_path only on success."""
    tmp = str(final_path) + ".tmp"
    try:
        yield tmp
        os.replace(tmp, final_path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _write_manifest(out_dir, command, seed, workers, cfg, outputs, duration):
    doc = {
        "command": command,
        "artifact_version": __version__,
        "master_seed": seed,
        "workers": workers,
        "config": cfg,
        "outputs": outputs,
        "duration_s": duration,
    }
    path = os.path.join(out_dir, MANIFEST_NAME)
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return path


def _device_from_config(v: ConfigView) -> DeviceParams:
    base = default_device_params(T=v.get_float("device", "temperature_k", 300.0))
    return DeviceParams(
        alpha=v.get_float("device", "alpha", base.alpha),
        Ms=v.get_float("device", "ms_a_per_m", base.Ms),
        V=v.get_float("device", "volume_m3", base.V),
        T=base.T,
        dt=v.get_float("device", "dt_s", base.dt),
        Hk=v.get_float("device", "hk_a_per_m", base.Hk),
        Hd=v.get_float("device", "hd_a_per_m", base.Hd),
    )


def _mtj_from_config(v: ConfigView) -> mtj.MtjParams:
    dev = _device_from_config(v)
    return mtj.MtjParams(
        device=dev,
        R_p=v.get_float("device", "r_p_ohm", 5e3),
        R_ap=v.get_float("device", "r_ap_ohm", 10e3),
        theta_sh=v.get_float("device", "theta_sh", 0.3),
        init_tilt=math.radians(v.get_float("device", "init_tilt_deg", 2.0)),
        equil_steps=v.get_int("device", "equil_steps", 100),
        relax_time=v.get_float("device", "relax_time_s", 3e-10),
    )


def _code_from_config(v: ConfigView) -> polar.PolarCodeSpec:
    return polar.construct_frozen_set(
        v.get_int("code", "n"),
        v.get_int("code", "k"),
        v.get_float("code", "design_snr_db", 0.0))


def cmd_device_sweep(v, seed, workers, out_dir):
    params = _mtj_from_config(v)
    currents = v.get_float_list("sweep", "currents_a", None)
    if currents is None:
        currents = np.linspace(v.get_float("sweep", "current_start_a"),
                               v.get_float("sweep", "current_stop_a"),
                               v.get_int("sweep", "points")).tolist()
    curve = mtj.sweep_switching_curve(
        currents,
        v.get_float("sweep", "pulse_width_s"),
        v.get_int("sweep", "trials_per_point"),
        params, seed, workers=workers)
    outputs = []
    csv_path = os.path.join(out_dir, "switching_curve.csv")
    with atomic_path(csv_path) as tmp:
        curve.to_csv(tmp)
    outputs.append("switching_curve.csv")
    try:
        fit = mtj.fit_stochastic_sigmoid(curve)
    except FitDomainError as exc:
        print(f"sigmoid fit failed: {exc}", file=sys.stderr)
        print(f"curve p_hat: {curve.p_hat.tolist()}", file=sys.stderr)
        return outputs, False
    fit_path = os.path.join(out_dir, "sigmoid_fit.json")
    with atomic_path(fit_path) as tmp:
        fit.to_json(tmp)
    outputs.append("sigmoid_fit.json")
    return outputs, True


def cmd_sc_arith_bench(v, seed, workers, out_dir):
    L = v.get_int("scarith", "length", 4096)
    n_seeds = v.get_int("scarith", "seeds", 100)
    values = v.get_float_list("scarith", "values", [0.1, 0.5, 0.9])
    rows = []
    for p in values:
        for q in values:
            and_pass = mux_pass = 0
            target_and = p * q
            target_mux = (p + q) / 2.0
            bound_and = 3.0 * math.sqrt(target_and * (1 - target_and) / L)
            var_mux = (0.5 * (p * (1 - p) + q * (1 - q))
                       + 0.25 * (p - q) ** 2) / L
            bound_mux = 3.0 * math.sqrt(var_mux)
            for i in range(n_seeds):
                root = derive_rng(seed, "sc-bench", i)
                sa, sb, ss = (int(root.integers(0, 2 ** 63)) for _ in range(3))
                a = bitstream.encode(p, L, sa)
                b = bitstream.encode(q, L, sb)
                sel = bitstream.encode(0.5, L, ss)
                if abs(bitstream.decode(bitstream.multiply_and(a, b)) - target_and) <= bound_and:
                    and_pass += 1
                if abs(bitstream.decode(bitstream.scaled_add_mux(a, b, sel)) - target_mux) <= bound_mux:
                    mux_pass += 1
            rows.append(("and", p, q, and_pass, bound_and))
            rows.append(("mux", p, q, mux_pass, bound_mux))
    path = os.path.join(out_dir, "sc_arith.csv")
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="\n") as fh:
            fh.write("op,p,q,length,seeds,passes,bound\n")
            for op, p, q, passes, bound in rows:
                fh.write(f"{op},{p!r},{q!r},{L},{n_seeds},{passes},{bound!r}\n")
    return ["sc_arith.csv"], True


def _build_decoder_dataset(spec, frames, snrs_db, seed):
    dataset = []
    for i in range(frames):
        rng = derive_rng(seed, "dataset", i)
        message = rng.integers(0, 2, size=spec.K).astype(np.uint8)
        codeword = polar.encode(message, spec)
        snr = snrs_db[i % len(snrs_db)]
        llrs = polar._awgn_llrs(codeword, snr, spec.rate, rng)
        dataset.append(training.Example(np.tanh(llrs / 2.0),
                                        message.astype(float)))
    return dataset


def cmd_train_decoder(v, seed, workers, out_dir):
    spec = _code_from_config(v)
    frames = v.get_int("dataset", "frames")
    snrs = v.get_float_list("dataset", "snrs_db")
    dataset = _build_decoder_dataset(spec, frames, snrs, seed)
    hidden = v.get_int_list("network", "hidden", [16])
    model = training.init_model([spec.N] + hidden + [spec.K], seed)
    cfg = training.OptimizerConfig(
        kind=v.get_str("training", "kind", "minibatch"),
        learning_rate=v.get_float("training", "learning_rate", 0.5),
        epochs=v.get_int("training", "epochs"),
        batch_size=v.get_int("training", "batch_size", 32),
        lr_decay=v.get_float("training", "lr_decay", 0.0),
        shuffle_seed=seed,
    )
    loss = training.LossSpec(kind=v.get_str(
        "training", "loss", training.CROSS_ENTROPY))
    model, history = training.train(model, dataset, cfg, loss)
    outputs = []
    for name, writer in (
            ("code_spec.json", spec.to_json),
            ("model.json", lambda p: save_model(model, p)),
            ("history.csv", lambda p: training.write_history_csv(history, p))):
        path = os.path.join(out_dir, name)
        with atomic_path(path) as tmp:
            writer(tmp)
        outputs.append(name)
    return outputs, True


def cmd_ber(v, seed, workers, out_dir):
    spec = _code_from_config(v)
    decoder = v.get_str("ber", "decoder", "classical")
    snrs = v.get_float_list("ber", "snrs_db")
    min_frames = v.get_int("ber", "min_frames")
    window = v.get_int("ber", "window", 64)
    which = ["classical", "neural"] if decoder == "paired" else [decoder]
    model = None
    if "neural" in which:
        model_path = v.get_str("ber", "model_path")
        if not os.path.exists(model_path):
            raise ConfigError(
                f"neural decoding needs a trained model; expected file at "
                f"{model_path} (run train-decoder first)")
        model = load_model(model_path)
    outputs = []
    for name in which:
        rows = polar.ber_experiment(spec, name, snrs, min_frames, seed,
                                    model=model, window=window,
                                    workers=workers)
        for fname, writer in ((f"ber_{name}.csv", polar.write_ber_csv),
                              (f"timing_{name}.csv", polar.write_timing_csv)):
            path = os.path.join(out_dir, fname)
            with atomic_path(path) as tmp:
                writer(rows, tmp)
            outputs.append(fname)
    return outputs, True


def cmd_gradcheck(v, seed, workers, out_dir):
    n_nets = v.get_int("gradcheck", "networks", 100)
    max_layers = v.get_int_list("gradcheck", "max_sizes", [4, 8, 4])
    loss = training.LossSpec(kind=v.get_str(
        "gradcheck", "loss", training.SQUARED_ERROR))
    rng = derive_rng(seed, "gradcheck")
    rows = []
    worst = 0.0
    for i in range(n_nets):
        sizes = [int(rng.integers(1, m + 1)) for m in max_layers]
        model = training.init_model(sizes, int(rng.integers(0, 2 ** 63)))
        example = training.Example(rng.standard_normal(sizes[0]),
                                   rng.uniform(0.1, 0.9, sizes[-1]))
        bp = training.backprop_gradient(model, example, loss)
        fd = training.finite_difference_gradient(model, example, loss)
        err = 0.0
        for (bw, bb), (fw, fb) in zip(bp, fd):
            scale_w = np.maximum(np.abs(fw), 1e-8)
            scale_b = np.maximum(np.abs(fb), 1e-8)
            err = max(err, float(np.max(np.abs(bw - fw) / scale_w)))
            if model.bias_enabled:
                err = max(err, float(np.max(np.abs(bb - fb) / scale_b)))
        worst = max(worst, err)
        rows.append((i, "x".join(map(str, sizes)), err))
    path = os.path.join(out_dir, "gradcheck.csv")
    with atomic_path(path) as tmp:
        with open(tmp, "w", newline="\n") as fh:
            fh.write("net,sizes,max_rel_error\n")
            for i, sizes, err in rows:
                fh.write(f"{i},{sizes},{err!r}\n")
    print(f"gradcheck: {n_nets} networks, max relative error {worst:.3e}")
    return ["gradcheck.csv"], worst <= 1e-5


_COMMANDS = {
    "device-sweep": cmd_device_sweep,
    "sc-arith-bench": cmd_sc_arith_bench,
    "train-decoder": cmd_train_decoder,
    "ber": cmd_ber,
    "gradcheck": cmd_gradcheck,
}


def _run(command, cfg_dict, seed, workers, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    view = ConfigView(cfg_dict)
    t0 = time.perf_counter()
    outputs, ok = _COMMANDS[command](view, seed, workers, out_dir)
    duration = time.perf_counter() - t0
    _write_manifest(out_dir, command, seed, workers, cfg_dict, outputs, duration)
    return 0 if ok else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinsc",
        description="MTJ stochastic-neuron lab and polar-code decoding harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides [run] seed)")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out-dir", default=".")
    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    args = parser.parse_args(argv)

    try:
        if args.command == "rerun":
            with open(args.manifest) as fh:
                doc = json.load(fh)
            cfg = doc["config"]
            command = doc["command"]
            seed = doc["master_seed"]
            workers = args.workers if args.workers is not None else doc["workers"]
        else:
            command = args.command
            cfg = load_config(args.config)
            view = ConfigView(cfg)
            seed = args.seed if args.seed is not None else view.get_int("run", "seed", 0)
            workers = (args.workers if args.workers is not None
                       else view.get_int("run", "workers", 1))
        return _run(command, cfg, seed, workers, args.out_dir)
    except SpinscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
