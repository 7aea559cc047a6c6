"""Command-line surface: generate | lift | train | predict | eval | gradcheck.

Runs are described by a JSON config file; any key can be overridden on the
command line with --set dotted.path=value (values parse as JSON, falling
back to plain strings).  Exit codes: 0 ok, 1 config error, 2 data error,
3 numeric failure.

Config keys (sections may be omitted when unused):

    data.vectors / data.edges / data.tuple_order / data.index_policy
    divergence            "logistic" | "kl" | "beta:<b>" | "itakura-saito" |
                          "inverse" | "quadratic" | "exponential" | "dual-logistic"
    epsilon               kl regularization offset (default 1e-4)
    eta_scale, clamp_margin
    model.kind ("linear"|"mlp1"), model.embed_dim, model.hidden_units,
    model.link, model.init_seed, model.init_scale, model.theta (explicit)
    sampler.v, sampler.u, sampler.m_plus, sampler.m_minus,
    sampler.j_distribution, sampler.seed, sampler.exhaustive
                          (omit the sampler section for full-batch training)
    optimizer.kind ("adam"|"sgd"), optimizer.schedule ("constant"|"inverse-t"),
    optimizer.step_size, optimizer.iterations, optimizer.weight_decay,
    optimizer.projection ("none"|"nonnegative"), optimizer.practical_scaling,
    optimizer.tau_sampling, optimizer.H_estimate, optimizer.seed
    eval.metric ("mse"|"roc_auc"), eval.cadence, eval.vectors, eval.edges,
    eval.per_anchor, eval.seed
    output.checkpoint, output.best_checkpoint, output.history
    generate.n, generate.p, generate.tuple_order, generate.index_policy,
    generate.noise, generate.noise_sigma, generate.vector_law, generate.seed,
    generate.model.*, generate.out_vectors, generate.out_edges
"""

import argparse
import csv
import json
import sys

import numpy as np

from .divergence import make_generator
from .errors import (
    ConfigError,
    DimMismatch,
    DomainError,
    DuplicateEdge,
    LengthMismatch,
    NonBinaryWeights,
    NonFiniteGradient,
    OutOfRange,
    ParseError,
    ShapeError,
    SingleClass,
    UnsupportedKind,
)
from .hypernet import (
    Hypernetwork,
    iter_index_batches,
    load_hyperedges,
    load_vectors,
    write_hyperedges,
    write_vectors,
)
from .loss import LossSpec, full_loss, model_scores
from .metrics import mean_squared_error, roc_auc
from .optim import Projection, Schedule, train
from .sampler import SamplerConfig
from .simfn import SimilarityModel
from .synth import PlantedModel, generate, lift_links_to_hyperlinks, \
    negative_candidate_protocol
from . import gradcheck as gradcheck_mod

_DATA_ERRORS = (ParseError, OutOfRange, DuplicateEdge, ShapeError,
                NonBinaryWeights, DomainError, LengthMismatch, DimMismatch,
                SingleClass, FileNotFoundError, IsADirectoryError)


# -- config handling ---------------------------------------------------------

def load_config(path, overrides=()):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs dotted.path=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object")
        node[parts[-1]] = value
    return cfg


def cfg_get(cfg, path, default=None, required=False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"missing config key {path!r}")
            return default
        node = node[part]
    return node


# -- builders ----------------------------------------------------------------

def build_network(cfg, section="data"):
    vectors = load_vectors(cfg_get(cfg, f"{section}.vectors", required=True))
    U = int(cfg_get(cfg, f"{section}.tuple_order", required=True))
    policy = cfg_get(cfg, f"{section}.index_policy", "increasing")
    edges_path = cfg_get(cfg, f"{section}.edges")
    weights = load_hyperedges(edges_path, U, len(vectors)) if edges_path else {}
    return Hypernetwork(vectors, U, weights, policy)


def build_model(mcfg, p, U):
    kind = mcfg.get("kind", "linear")
    K = int(mcfg.get("embed_dim", 1))
    H = mcfg.get("hidden_units")
    link = mcfg.get("link", "identity")
    theta = mcfg.get("theta")
    if theta is not None:
        return SimilarityModel(kind, p, K, U, link=link, H=H,
                               theta=np.asarray(theta, dtype=np.float64))
    return SimilarityModel.create(
        kind, p, K, U, link=link, H=H,
        seed=int(mcfg.get("init_seed", 0)),
        scale=float(mcfg.get("init_scale", 1.0)))


def build_sampler_cfg(cfg):
    scfg = cfg.get("sampler")
    if not scfg:
        return None
    return SamplerConfig(
        v=int(scfg.get("v", 0)),
        u=tuple(scfg["u"]) if scfg.get("u") is not None else None,
        m_plus=int(scfg.get("m_plus", 1)),
        m_minus=int(scfg.get("m_minus", 1)),
        j_distribution=scfg.get("j_distribution", "uniform"),
        custom_weights={tuple(k): v for k, v in scfg["custom_weights"].items()}
        if scfg.get("custom_weights") else None,
        seed=int(scfg.get("seed", 0)),
        exhaustive=bool(scfg.get("exhaustive", False)),
    )


def build_schedule(cfg):
    ocfg = cfg.get("optimizer", {})
    kind = ocfg.get("kind", "adam")
    if kind == "adam":
        sched_kind = "adam"
    elif kind == "sgd":
        sched_kind = ocfg.get("schedule", "constant")
    else:
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    return Schedule(
        kind=sched_kind,
        gamma=float(ocfg.get("step_size", 1e-3)),
        T=int(ocfg.get("iterations", 100)),
        beta1=float(ocfg.get("beta1", 0.9)),
        beta2=float(ocfg.get("beta2", 0.999)),
        eps=float(ocfg.get("eps", 1e-8)),
        weight_decay=float(ocfg.get("weight_decay", 0.0)),
        tau_sampling=bool(ocfg.get("tau_sampling", False)),
        H_estimate=ocfg.get("H_estimate"),
    )


def build_projection(cfg):
    kind = cfg_get(cfg, "optimizer.projection", "none")
    if kind in ("none", "nonnegative"):
        return Projection(kind)
    raise ConfigError(f"unsupported projection {kind!r} in config")


def build_eval_fn(cfg, model_U):
    """Validation metric closure from the eval.* section, or None."""
    ecfg = cfg.get("eval", {})
    if not ecfg.get("vectors"):
        return None, "min"
    val_net = build_network({"data": {
        "vectors": ecfg["vectors"],
        "edges": ecfg.get("edges"),
        "tuple_order": cfg_get(cfg, "data.tuple_order", model_U),
        "index_policy": ecfg.get("index_policy",
                                 cfg_get(cfg, "data.index_policy", "increasing")),
    }})
    metric = ecfg.get("metric", "mse")
    if metric == "mse":
        indices = np.asarray(
            np.concatenate([b for b in iter_index_batches(val_net)]),
            dtype=np.int64)
        observed = np.asarray([val_net.weight(i) for i in indices])

        def eval_fn(model):
            return mean_squared_error(model_scores(model, val_net, indices),
                                      observed)
        return eval_fn, "min"
    if metric == "roc_auc":
        protocol = negative_candidate_protocol(
            val_net, int(ecfg.get("per_anchor", 10)),
            seed=int(ecfg.get("seed", 0)))
        indices = np.asarray(protocol, dtype=np.int64)
        labels = np.asarray([val_net.weight(i) != 0.0 for i in protocol])

        def eval_fn(model):
            return roc_auc(model_scores(model, val_net, indices), labels)
        return eval_fn, "max"
    raise ConfigError(f"unknown metric {metric!r}")


# -- subcommands ---------------------------------------------------------------

def cmd_generate(cfg):
    gcfg = cfg.get("generate")
    if not gcfg:
        raise ConfigError("config has no 'generate' section")
    n = int(gcfg.get("n", 0))
    U = int(gcfg.get("tuple_order", 2))
    p = int(gcfg.get("p", gcfg.get("model", {}).get("p", 2)))
    model = build_model(gcfg.get("model", {}), p, U)
    planted = PlantedModel(
        model,
        noise=gcfg.get("noise", "gaussian"),
        noise_sigma=float(gcfg.get("noise_sigma", 0.0)),
        vector_law=gcfg.get("vector_law", "uniform"),
    )
    net = generate(planted, n, U,
                   index_policy=gcfg.get("index_policy", "increasing"),
                   seed=int(gcfg.get("seed", 0)))
    write_vectors(cfg_get(gcfg, "out_vectors", required=True), net.vectors)
    write_hyperedges(cfg_get(gcfg, "out_edges", required=True), net.weights)
    print(f"generated n={net.n} p={net.p} U={U} with "
          f"{len(net.weights)} nonzero weights")
    return 0


def cmd_lift(args):
    vectors = load_vectors(args.vectors)
    weights = load_hyperedges(args.edges, 2, len(vectors))
    net2 = Hypernetwork(vectors, 2, weights, "increasing")
    net3 = lift_links_to_hyperlinks(net2, args.mode)
    write_hyperedges(args.out_edges, net3.weights)
    print(f"lifted {len(weights)} links to {len(net3.weights)} "
          f"{args.mode} hyperlinks")
    return 0


def cmd_train(cfg):
    net = build_network(cfg)
    model = build_model(cfg.get("model", {}), net.p, net.U)
    gen = make_generator(cfg.get("divergence", "quadratic"),
                         epsilon=cfg.get("epsilon"))
    spec = LossSpec(gen, model,
                    eta_scale=float(cfg.get("eta_scale", 1.0)),
                    clamp_margin=float(cfg.get("clamp_margin", 1e-7)))
    eval_fn, direction = build_eval_fn(cfg, net.U)
    result = train(
        net, spec,
        schedule=build_schedule(cfg),
        projection=build_projection(cfg),
        sampler_cfg=build_sampler_cfg(cfg),
        seed=int(cfg_get(cfg, "optimizer.seed", 0)),
        cadence=int(cfg_get(cfg, "eval.cadence", 50)),
        eval_fn=eval_fn,
        metric_direction=direction,
        practical_scaling=bool(cfg_get(cfg, "optimizer.practical_scaling", False)),
    )
    if any(not np.isfinite(row[1]) for row in result.history):
        raise NonFiniteGradient("training loss became non-finite")

    ckpt = cfg_get(cfg, "output.checkpoint")
    if ckpt:
        model.theta = result.theta
        model.save(ckpt)
    best = cfg_get(cfg, "output.best_checkpoint")
    if best:
        saved = model.theta
        model.theta = result.best_theta
        model.save(best)
        model.theta = saved
    hist = cfg_get(cfg, "output.history")
    if hist:
        with open(hist, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "train_loss", "val_metric", "elapsed_ms"])
            for it, lo, me, ms in result.history:
                writer.writerow([it, repr(lo), repr(me), f"{ms:.3f}"])
    final = result.history[-1] if result.history else (0, float("nan"),
                                                       float("nan"), 0.0)
    print(f"trained {result.iterations} iterations; "
          f"final loss {final[1]:.6g}, val metric {final[2]:.6g}")
    return 0


def cmd_predict(args):
    model = SimilarityModel.load(args.model)
    vectors = load_vectors(args.vectors)
    tuples = []
    with open(args.tuples, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != model.U:
                raise DimMismatch(
                    f"{args.tuples}:{lineno}: {len(parts)} ids but model "
                    f"U={model.U}")
            try:
                tuples.append([int(v) for v in parts])
            except ValueError:
                raise ParseError(f"{args.tuples}:{lineno}: cannot parse ids",
                                 line=lineno)
    net = Hypernetwork(vectors, model.U, {}, "all-tuples")
    for t in tuples:
        for v in t:
            if not 0 <= v < net.n:
                raise OutOfRange(f"node id {v} outside [0, {net.n})")
    scores = model_scores(model, net, np.asarray(tuples, dtype=np.int64)
                          if tuples else np.zeros((0, model.U), dtype=np.int64))
    with open(args.out, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(f"{float(s)!r}\n")
    return 0


def cmd_eval(cfg, model_path, out_path=None):
    model = SimilarityModel.load(model_path)
    net = build_network(cfg)
    if model.U != net.U:
        raise DimMismatch(f"model U={model.U} but data U={net.U}")
    metric = cfg_get(cfg, "eval.metric", "mse")
    if metric == "mse":
        indices = np.concatenate(list(iter_index_batches(net)))
        observed = np.asarray([net.weight(i) for i in indices])
        value = mean_squared_error(model_scores(model, net, indices), observed)
        result = {"mse": value}
    elif metric == "roc_auc":
        protocol = negative_candidate_protocol(
            net, int(cfg_get(cfg, "eval.per_anchor", 10)),
            seed=int(cfg_get(cfg, "eval.seed", 0)))
        labels = np.asarray([net.weight(i) != 0.0 for i in protocol])
        scores = model_scores(model, net, np.asarray(protocol, dtype=np.int64))
        result = {"roc_auc": roc_auc(scores, labels)}
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    text = json.dumps(result)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_gradcheck(args):
    ok = gradcheck_mod.run_all(seed=args.seed)
    return 0 if ok else 1


# -- entry point -----------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(
        prog="bhlr",
        description="hyperlink regression with Bregman-divergence losses")
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("generate", "train", "eval"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="dotted.path=value")
        if name == "eval":
            sp.add_argument("--model", required=True)
            sp.add_argument("--out")

    sp = sub.add_parser("lift")
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--edges", required=True)
    sp.add_argument("--mode", choices=("connected", "fully-connected"),
                    required=True)
    sp.add_argument("--out-edges", required=True)

    sp = sub.add_parser("predict")
    sp.add_argument("--model", required=True)
    sp.add_argument("--vectors", required=True)
    sp.add_argument("--tuples", required=True)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("gradcheck")
    sp.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(load_config(args.config, args.overrides))
        if args.command == "lift":
            return cmd_lift(args)
        if args.command == "train":
            return cmd_train(load_config(args.config, args.overrides))
        if args.command == "predict":
            return cmd_predict(args)
        if args.command == "eval":
            return cmd_eval(load_config(args.config, args.overrides),
                            args.model, args.out)
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except UnsupportedKind as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteGradient as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
