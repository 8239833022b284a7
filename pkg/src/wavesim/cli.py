"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric or solver error,
4 I/O or file-format error.
"""

import argparse
import contextlib
import csv
import math
import os
import sys

import numpy as np

from .estimator import ScatteredFieldPINN
from .exceptions import ConfigError, DomainError, FormatError, SolverError
from .fd import ComplexField, fd_reference
from .io import (MetricsWriter, load_config, load_field,
                 read_metrics, save_checkpoint, save_field, save_velocity)
from .models import homogeneous, marmousi_like, two_layer
from .training import relative_l2

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

THREADS_ENV = "WAVESIM_THREADS"


def _thread_limit():
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@contextlib.contextmanager
def _limited_threads():
    n = _thread_limit()
    if n is None:
        yield
        return
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=n):
        yield


def _estimator(cfg, verbose):
    return ScatteredFieldPINN(
        mode=cfg.mode, hidden_sizes=cfg.hidden_sizes,
        encoding_level=cfg.encoding_level, n_collocation=cfg.n_collocation,
        n_constraint=cfg.n_constraint, beta=cfg.beta, epochs=cfg.epochs,
        lr_start=cfg.lr_start, lr_end=cfg.lr_end, adam_beta1=cfg.adam_beta1,
        adam_beta2=cfg.adam_beta2, adam_eps=cfg.adam_eps,
        eps_start=cfg.eps_start, eps_end=cfg.eps_end,
        eps_decay_epochs=cfg.eps_decay_epochs,
        constraint_block=cfg.constraint_block, length_scale=cfg.length_scale,
        validate_every=cfg.validate_every, random_state=cfg.seed,
        verbose=verbose)


def _interior_grid(cfg):
    d = cfg.domain()
    h = cfg.fd_spacing
    nx = int(round((d.x_br - d.x_bl) / h)) + 1
    nz = int(round((d.z_bd - d.z_bu) / h)) + 1
    return ComplexField(np.zeros((nx, nz), dtype=complex), h, h, d.x_bl, d.z_bu)


def cmd_make_model(args):
    cfg = load_config(args.config)
    d = cfg.domain()
    ext_x, ext_z = d.x_max - d.x_min, d.z_max - d.z_min
    h = cfg.model_spacing
    if cfg.model_kind == "homogeneous":
        model = homogeneous(cfg.model_v_top, ext_x, ext_z, h, d.x_min, d.z_min)
    elif cfg.model_kind == "two_layer":
        model = two_layer(cfg.model_v_top, cfg.model_v_bottom, cfg.model_interface_depth,
                          ext_x, ext_z, h, d.x_min, d.z_min)
    elif cfg.model_kind == "marmousi_like":
        model = marmousi_like(ext_x, ext_z, h, d.x_min, d.z_min, cfg.model_v_top,
                              cfg.model_v_bottom, seed=cfg.model_seed)
    else:
        raise ConfigError(f"unknown model_kind {cfg.model_kind!r}")
    out = cfg.path("velocity_file")
    save_velocity(out, model)
    print(f"wrote {out} ({model.nx}x{model.nz})")


def cmd_fd(args):
    cfg = load_config(args.config)
    problem = cfg.problem()
    field, res = fd_reference(problem, cfg.fd_pml(), cfg.fd_spacing, cfg.fd_refine)
    out = cfg.path("field_file")
    save_field(out, field)
    print(f"residual {res:.3e}")
    print(f"wrote {out} ({field.nx}x{field.nz})")


def cmd_train(args):
    cfg = load_config(args.config)
    if args.mode:
        cfg.mode = args.mode
    problem = cfg.problem()
    reference = None
    if cfg.validate_every > 0:
        reference = load_field(cfg.path("reference_file"))
    est = _estimator(cfg, args.verbose)
    metrics_path = cfg.path("metrics_file")
    if metrics_path.exists():
        metrics_path.unlink()
    with MetricsWriter(metrics_path) as sink:
        est.fit(problem, reference=reference, metrics=sink)
    save_checkpoint(cfg.path("checkpoint_file"), est.params_)
    grid = reference.crop(problem.domain) if reference is not None else _interior_grid(cfg)
    pred = est.predict_field(grid)
    save_field(cfg.path("prediction_file"), pred)
    last = est.history_[-1] if est.history_ else None
    if last is not None:
        val = "" if last.val_rel_l2 is None else f" val_rel_l2 {last.val_rel_l2:.4f}"
        print(f"epochs {est.n_epochs_} loss {last.loss:.4e}{val}")
    else:
        print("epochs 0")


def cmd_compare(args):
    cfg = load_config(args.config)
    a = load_field(args.a)
    b = load_field(args.b)
    if not a.same_grid(b):
        raise FormatError(f"grids differ: {args.a} is {a.nx}x{a.nz}, {args.b} is {b.nx}x{b.nz}")
    d = cfg.domain()
    ref = a.crop(d).values
    pred = b.crop(d).values
    print(f"{relative_l2(pred, ref):.6g}")


def _cell(v):
    return "" if v is None else f"{v:.10g}"


def cmd_export_metrics(args):
    rows = read_metrics(args.csv)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["epoch", "loss", "log10_loss", "val_rel_l2", "lr", "epsilon", "seconds"])
        for r in rows:
            loss = r["loss"]
            log_loss = math.log10(loss) if loss else None
            w.writerow([r["epoch"]] + [_cell(v) for v in (
                loss, log_loss, r["val_rel_l2"], r["lr"], r["epsilon"], r["seconds"])])
    finally:
        if out is not sys.stdout:
            out.close()


def build_parser():
    p = argparse.ArgumentParser(prog="wavesim",
                                description="Scattered Helmholtz wavefields: FD reference and LS-GD PINN training")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-model", help="write a procedural velocity raster")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_make_model)

    s = sub.add_parser("fd", help="finite-difference reference field")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_fd)

    s = sub.add_parser("train", help="train the network")
    s.add_argument("--config", required=True)
    s.add_argument("--mode", choices=["gd", "lsgd"])
    s.add_argument("-v", "--verbose", action="count", default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("compare", help="interior relative L2 of field b against field a")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("export-metrics", help="re-emit a metrics CSV with plot-ready columns")
    s.add_argument("csv")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_export_metrics)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with _limited_threads():
            args.func(args)
    except (SolverError, DomainError, ArithmeticError) as err:
        print(f"wavesim: numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError) as err:
        print(f"wavesim: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"wavesim: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
