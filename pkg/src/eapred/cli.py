"""Command-line entry point: ``eapred <command> [--config FILE] [flags]``.

Settings resolve in three layers, later layers winning: built-in defaults,
the YAML file given with ``--config``, then command-line flags.  Every
command writes into a fresh run directory (``--out``, or
``<runs-root>/<command>-<digest8>-<UTC timestamp>``) and finishes by writing
``run_manifest.json``, which lists every artifact with its checksum.
"""

from __future__ import annotations

import copy
import datetime as dt
import hashlib
import json
import logging
import os
import platform
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np
import yaml

from eapred import __version__
from eapred.data import IngestConfig, IngestReport, SyntheticSpec, generate_synthetic, ingest, load_dataset, write_dataset
from eapred.data.io import MANIFEST, dataset_digest, file_digest
from eapred.errors import ComparabilityError, ConfigError, EapredError, InputError, NumericalError
from eapred.evaluation import EvaluationReport, ablation_report, confusion, cost_matrix, format_table, write_confusion_csv
from eapred.features import prepare as prepare_windows
from eapred.features import read_window_store, write_window_store
from eapred.labeling import CLASS_NAMES, write_labels
from eapred.models import ModelConfig, load_params, predict_proba, save_params
from eapred.models.config import KINDS
from eapred.models.verify import model_gradcheck
from eapred.sentiment import provider_from_config
from eapred.training import LossSpec, TrainConfig, class_weights, train

log = logging.getLogger("eapred")

RUN_MANIFEST = "run_manifest.json"
LOCK = ".lock"
SPLITS = ("train", "val", "test")

DEFAULTS = {
    "seed": 0,
    "paths": {"data": None, "dataset": None, "prepared": None, "run": None},
    "synthetic": {},
    "tau": 0.03,
    "split": [0.7, 0.15, 0.15],
    "sentiment": {"kind": "lexicon"},
    "model": {"kind": "lstm"},
    "with_sentiment": True,
    "train": {},
    "loss": {"mode": "inverse-frequency", "manual": None, "override": False},
    "costs": {"directional": 3.0, "other": 1.0},
    "evaluate": {"split": "test"},
}


# ---------------------------------------------------------------- config


# sections validated by their own dataclasses; keys are passed through
OPEN_SECTIONS = ("synthetic", "model", "train")
# sections replaced wholesale, since their keys depend on a "kind"
REPLACED_SECTIONS = ("sentiment",)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(base[k], dict) and k not in REPLACED_SECTIONS:
            if not isinstance(v, dict):
                raise ConfigError(f"config key {k!r} must be a mapping")
            unknown = set(v) - set(base[k])
            if unknown and k not in OPEN_SECTIONS:
                raise ConfigError(f"unknown config keys under {k!r}: {sorted(unknown)}")
            out[k].update(copy.deepcopy(v))
        else:
            out[k] = copy.deepcopy(v)
    return out


def _set(cfg, dotted, value):
    if value is None:
        return
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


class RunConfig:
    """Resolved configuration; ``digest`` identifies the run."""

    def __init__(self, data):
        self.data = data
        self._validate()

    @classmethod
    def load(cls, path=None, overrides=None):
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                loaded = yaml.safe_load(Path(path).read_text()) or {}
            except FileNotFoundError:
                raise InputError(f"config file not found: {path}") from None
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: invalid YAML: {exc}") from None
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
            data = _merge(data, loaded)
        for dotted, value in (overrides or {}).items():
            _set(data, dotted, value)
        return cls(data)

    def _validate(self):
        self.synthetic_spec()
        self.model_config(21, 30)
        self.train_config()
        split = self.data["split"]
        if len(split) != 3 or any(f < 0 for f in split) or abs(sum(split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {split}")
        if not 0 < float(self.data["tau"]) < 1:
            raise ConfigError(f"tau must lie in (0, 1), got {self.data['tau']}")
        if self.data["evaluate"]["split"] not in SPLITS:
            raise ConfigError(f"evaluate.split must be one of {SPLITS}")

    def __getitem__(self, k):
        return self.data[k]

    def digest(self):
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True)

    def synthetic_spec(self):
        d = {"seed": self.data["seed"], **self.data["synthetic"]}
        spec = SyntheticSpec.from_dict(d)
        spec.validate()
        return spec

    def model_config(self, input_dim, seq_len):
        m = dict(self.data["model"])
        return ModelConfig.from_dict({"seed": self.data["seed"], **m, "input_dim": input_dim, "seq_len": seq_len})

    def train_config(self):
        return TrainConfig.from_dict({"seed": self.data["seed"], **self.data["train"]})


# ---------------------------------------------------------------- run directories


def _utc_stamp():
    return dt.datetime.now(dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


class Run:
    def __init__(self, path, command, config):
        self.path = path
        self.command = command
        self.config = config
        self.started = dt.datetime.now(dt.timezone.utc).isoformat()
        self.inputs = {}
        self.dataset_digest = None

    def file(self, *parts):
        p = self.path.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write_json(self, name, obj):
        self.file(name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def finish(self):
        artifacts = {}
        for p in sorted(self.path.rglob("*")):
            if p.is_file() and p.name not in (LOCK, RUN_MANIFEST):
                artifacts[p.relative_to(self.path).as_posix()] = file_digest(p)
        manifest = {
            "command": self.command,
            "config_digest": self.config.digest(),
            "dataset_digest": self.dataset_digest,
            "inputs": self.inputs,
            "artifacts": artifacts,
            "started_at": self.started,
            "finished_at": dt.datetime.now(dt.timezone.utc).isoformat(),
            "toolchain": {
                "eapred": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
            },
        }
        with open(self.path / RUN_MANIFEST, "x") as fh:
            fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


@contextmanager
def run_directory(command, config, out=None, runs_root="runs"):
    """Create and lock a fresh output directory; refuse to touch a used one."""
    if out is None:
        out = Path(runs_root) / f"{command}-{config.digest()[:8]}-{_utc_stamp()}"
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"{out} is locked by another run ({lock} exists)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        if any(p.name != LOCK for p in out.iterdir()):
            raise ConfigError(f"refusing to write into non-empty directory {out}")
        run = Run(out, command, config)
        run.file("config.yaml").write_text(config.to_yaml())
        yield run
        run.finish()
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------- shared steps


def _require_dir(path, what, marker):
    if path is None:
        raise ConfigError(f"no {what} directory given")
    p = Path(path)
    if not (p / marker).is_file():
        raise InputError(f"{p} is not a {what} directory ({marker} missing)")
    return p


def _split_digest(prepared):
    h = hashlib.sha256()
    h.update(repr(prepared.tau).encode())
    for name in SPLITS:
        h.update(name.encode())
        for r in prepared.splits[name].refs:
            h.update(f"{r.firm_id}|{r.announcement_date.isoformat()};".encode())
    return h.hexdigest()


def _store_name(split, with_sentiment):
    return f"windows/{split}.{'full' if with_sentiment else 'ablated'}.bin"


def _load_split(prepared_dir, split, with_sentiment):
    data, meta = read_window_store(Path(prepared_dir) / _store_name(split, with_sentiment))
    return data, meta


def _prepared_info(prepared_dir):
    return json.loads((Path(prepared_dir) / "prepare.json").read_text())


def _loss_spec(config, y_train):
    loss = config["loss"]
    if loss["mode"] == "manual":
        return class_weights(mode="manual", manual=loss["manual"], override=bool(loss["override"]))
    from eapred.labeling import distribution

    return class_weights(distribution(y_train.tolist()), mode=loss["mode"])


def _train_model(run, config, prepared_dir, with_sentiment, prefix=""):
    info = _prepared_info(prepared_dir)
    tr, meta = _load_split(prepared_dir, "train", with_sentiment)
    va, _ = _load_split(prepared_dir, "val", with_sentiment)
    model_cfg = config.model_config(meta["d"], meta["T"])
    train_cfg = config.train_config()
    spec = _loss_spec(config, tr.y)
    log.info("training %s (d=%d) on %d windows, class weights %s", model_cfg.kind, meta["d"], len(tr.y), spec.weights)
    params, tlog = train(model_cfg, (tr.X, tr.y), spec, train_cfg, val_data=(va.X, va.y), run_dir=run.file(prefix or "."))
    extra = {
        "with_sentiment": bool(with_sentiment),
        "split_digest": info["split_digest"],
        "labels_digest": info["labels_digest"],
        "tau": info["tau"],
        "class_weights": list(spec.weights),
        "train_config": train_cfg.to_dict(),
    }
    ckpt = run.file(prefix, "model.ckpt")
    save_params(ckpt, params, extra=extra)
    tlog.write_jsonl(run.file(prefix, "train_log.jsonl"))
    final = {"epochs": len(tlog.epochs), "final": tlog.deterministic_view()[-1], "labels_digest": info["labels_digest"]}
    run.file(prefix, "final_metrics.json").write_text(json.dumps(final, indent=2, sort_keys=True) + "\n")
    return ckpt


def _evaluate_checkpoint(config, ckpt, prepared_dir, split):
    params, meta = load_params(ckpt, with_meta=True)
    extra = meta.get("extra", {})
    info = _prepared_info(prepared_dir)
    if extra.get("split_digest") != info["split_digest"]:
        raise ComparabilityError(f"checkpoint {ckpt} was trained on a different split than {prepared_dir}")
    with_sentiment = bool(extra.get("with_sentiment", True))
    data, smeta = _load_split(prepared_dir, split, with_sentiment)
    if (smeta["T"], smeta["d"]) != (params.config.seq_len, params.config.input_dim):
        raise ComparabilityError(
            f"store shape (T={smeta['T']}, d={smeta['d']}) does not match checkpoint "
            f"(T={params.config.seq_len}, d={params.config.input_dim})"
        )
    if len(data.y) == 0:
        raise InputError(f"split {split!r} is empty")
    pred = np.argmax(predict_proba(params, data.X), axis=1)
    cm = confusion(data.y, pred)
    costs = cost_matrix(**config["costs"])
    return EvaluationReport.from_confusion(
        cm,
        costs,
        model_kind=params.config.kind,
        with_sentiment=with_sentiment,
        seed=params.config.seed,
        tau=info["tau"],
        split=split,
        n_events=int(cm.sum()),
        split_digest=info["split_digest"],
        checkpoint_digest=file_digest(ckpt),
    )


def _write_report(run, report, prefix=""):
    run.file(prefix, "report.json").write_text(report.to_json())
    run.file(prefix, "table.txt").write_text(format_table([report]))
    write_confusion_csv(run.file(prefix, "confusion.csv"), report.confusion)


# ---------------------------------------------------------------- click surface


def _common(f):
    f = click.option("--runs-root", default="runs", show_default=True, help="Parent of auto-named run directories.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), help="Exact output directory (must be empty or absent).")(f)
    f = click.option("--seed", type=int, help="Top-level seed for every random substream.")(f)
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML config file.")(f)
    return f


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def cli(verbose):
    """Earnings-announcement price-movement prediction toolkit."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command()
@_common
@click.option("--n-firms", type=int)
@click.option("--months", type=int)
@click.option("--fidelity", type=float, help="Sentiment fidelity rho in [0, 1].")
def synth(config_path, seed, out, runs_root, n_firms, months, fidelity):
    """Generate a synthetic dataset in the ingest file format."""
    cfg = RunConfig.load(
        config_path,
        {"seed": seed, "synthetic.n_firms": n_firms, "synthetic.months": months, "synthetic.sentiment_fidelity": fidelity},
    )
    spec = cfg.synthetic_spec()
    with run_directory("synth", cfg, out, runs_root) as run:
        datasets = generate_synthetic(spec)
        manifest = write_dataset(datasets, run.path)
        run.write_json("synthetic_spec.json", spec.to_dict())
        run.dataset_digest = manifest["digest"]
        click.echo(f"{run.path}\t{sum(len(d.events) for d in datasets.values())} events\tdigest {manifest['digest'][:12]}")


@cli.command("ingest")
@_common
@click.option("--data", type=click.Path(file_okay=False), help="Directory holding the four input tables.")
def ingest_cmd(config_path, seed, out, runs_root, data):
    """Validate input tables and persist a normalized dataset store."""
    cfg = RunConfig.load(config_path, {"seed": seed, "paths.data": data})
    src = cfg["paths"]["data"]
    if src is None:
        raise ConfigError("no input directory given (--data or paths.data)")
    report = IngestReport()
    datasets = ingest(IngestConfig.from_directory(src), report)
    with run_directory("ingest", cfg, out, runs_root) as run:
        manifest = write_dataset(datasets, run.path)
        run.write_json(
            "ingest_report.json",
            {
                "input_row_counts": report.row_counts,
                "duplicate_articles": report.duplicate_articles,
                "orphan_rows": report.orphan_rows,
                "firms_without_events": report.firms_without_events,
            },
        )
        run.inputs["data"] = str(src)
        run.dataset_digest = manifest["digest"]
        click.echo(f"{run.path}\t{manifest['firms']} firms\tdigest {manifest['digest'][:12]}")


@cli.command("prepare")
@_common
@click.option("--dataset", type=click.Path(file_okay=False), help="Dataset store from synth or ingest.")
@click.option("--tau", type=float, help="Labeling threshold (default 0.03).")
@click.option("--provider", type=click.Choice(["lexicon", "precomputed", "remote"]), help="Sentiment provider kind.")
@click.option("--provider-arg", help="Path for 'precomputed', URL for 'remote'.")
def prepare_cmd(config_path, seed, out, runs_root, dataset, tau, provider, provider_arg):
    """Label events and build train/val/test window stores with and without sentiment."""
    overrides = {"seed": seed, "paths.dataset": dataset, "tau": tau}
    if provider == "lexicon":
        overrides["sentiment"] = {"kind": "lexicon"}
    elif provider is not None:
        if provider_arg is None:
            raise ConfigError(f"--provider {provider} needs --provider-arg")
        overrides["sentiment"] = {"kind": provider, ("path" if provider == "precomputed" else "url"): provider_arg}
    cfg = RunConfig.load(config_path, overrides)
    ds_dir = _require_dir(cfg["paths"]["dataset"], "dataset", MANIFEST)
    datasets = load_dataset(ds_dir)
    prov = provider_from_config(cfg["sentiment"])
    tau = float(cfg["tau"])
    prepared = prepare_windows(datasets, prov, tau=tau, fractions=tuple(cfg["split"]))
    with run_directory("prepare", cfg, out, runs_root) as run:
        run.inputs["dataset"] = str(ds_dir)
        run.dataset_digest = dataset_digest(ds_dir)
        for name in SPLITS:
            for with_sent in (True, False):
                write_window_store(
                    run.file(_store_name(name, with_sent)),
                    name,
                    prepared.splits[name],
                    with_sent,
                    prepared.scaler,
                    prepared.imputer_means,
                    tau,
                )
        write_labels(run.file("labels.csv"), prepared.labeled)
        run.write_json("scaler.json", prepared.scaler.to_dict())
        dist = {}
        for name in SPLITS:
            y = prepared.splits[name].y
            counts = np.bincount(y, minlength=3).tolist() if len(y) else [0, 0, 0]
            dist[name] = {c: int(n) for c, n in zip(CLASS_NAMES, counts)}
        run.write_json("class_distribution.json", dist)
        run.write_json(
            "skipped.json", [{"firm_id": f, "announcement_date": d, "reason": k, "detail": m} for f, d, k, m in prepared.skipped]
        )
        run.write_json(
            "prepare.json",
            {
                "tau": tau,
                "split_fractions": list(cfg["split"]),
                "split_sizes": {n: len(prepared.splits[n].y) for n in SPLITS},
                "split_digest": _split_digest(prepared),
                "labels_digest": file_digest(run.path / "labels.csv"),
                "dataset_digest": run.dataset_digest,
                "sentiment": cfg["sentiment"],
            },
        )
        click.echo(f"{run.path}\t" + "\t".join(f"{n}={len(prepared.splits[n].y)}" for n in SPLITS))


def _train_overrides(seed, model, no_sentiment, epochs, batch_size, lr, optimizer, weights, override_weights, checkpoint_every):
    o = {
        "seed": seed,
        "model.kind": model,
        "train.epochs": epochs,
        "train.batch_size": batch_size,
        "train.learning_rate": lr,
        "train.optimizer": optimizer,
        "train.checkpoint_every": checkpoint_every,
    }
    if no_sentiment is not None:
        o["with_sentiment"] = not no_sentiment
    if weights is not None:
        try:
            o["loss"] = {"mode": "manual", "manual": [float(w) for w in weights.split(",")], "override": bool(override_weights)}
        except ValueError:
            raise ConfigError(f"--class-weights must be three comma-separated numbers, got {weights!r}") from None
    return o


def _train_options(f):
    f = click.option("--checkpoint-every", type=int, help="Save a checkpoint every N epochs (0 = final only).")(f)
    f = click.option("--override-weights", is_flag=True, default=None, help="Accept manual weights violating the ordering.")(f)
    f = click.option("--class-weights", "weights", help="Manual weights 'w_up,w_down,w_neutral'.")(f)
    f = click.option("--optimizer", type=click.Choice(["adam", "lbfgs"]))(f)
    f = click.option("--lr", type=float, help="Learning rate (default 5e-5).")(f)
    f = click.option("--batch-size", type=int, help="Mini-batch size (default 8).")(f)
    f = click.option("--epochs", type=int, help="Training epochs (default 15).")(f)
    f = click.option("--model", type=click.Choice(KINDS))(f)
    f = click.option("--prepared", type=click.Path(file_okay=False), help="Output directory of 'prepare'.")(f)
    return f


@cli.command("train")
@_common
@_train_options
@click.option("--no-sentiment/--sentiment", default=None, help="Drop the three sentiment features (d=18).")
def train_cmd(config_path, seed, out, runs_root, prepared, model, epochs, batch_size, lr, optimizer, weights, override_weights, checkpoint_every, no_sentiment):
    """Train one model on a prepared window store."""
    o = _train_overrides(seed, model, no_sentiment, epochs, batch_size, lr, optimizer, weights, override_weights, checkpoint_every)
    o["paths.prepared"] = prepared
    cfg = RunConfig.load(config_path, o)
    pdir = _require_dir(cfg["paths"]["prepared"], "prepared", "prepare.json")
    with run_directory("train", cfg, out, runs_root) as run:
        run.inputs["prepared"] = str(pdir)
        run.dataset_digest = _prepared_info(pdir)["dataset_digest"]
        ckpt = _train_model(run, cfg, pdir, bool(cfg["with_sentiment"]))
        click.echo(f"{run.path}\t{ckpt.name}")


@cli.command("evaluate")
@_common
@click.option("--prepared", type=click.Path(file_okay=False), help="Output directory of 'prepare'.")
@click.option("--run", "run_dir", type=click.Path(file_okay=False), help="Output directory of 'train'.")
@click.option("--checkpoint", type=click.Path(dir_okay=False), help="Checkpoint file (overrides --run).")
@click.option("--split", type=click.Choice(SPLITS), help="Split to score (default test).")
def evaluate_cmd(config_path, seed, out, runs_root, prepared, run_dir, checkpoint, split):
    """Score a trained checkpoint and write report.json, table.txt and confusion.csv."""
    cfg = RunConfig.load(config_path, {"seed": seed, "paths.prepared": prepared, "paths.run": run_dir, "evaluate.split": split})
    pdir = _require_dir(cfg["paths"]["prepared"], "prepared", "prepare.json")
    if checkpoint is None:
        rdir = _require_dir(cfg["paths"]["run"], "train run", "model.ckpt")
        checkpoint = rdir / "model.ckpt"
    report = _evaluate_checkpoint(cfg, Path(checkpoint), pdir, cfg["evaluate"]["split"])
    with run_directory("evaluate", cfg, out, runs_root) as run:
        run.inputs.update(prepared=str(pdir), checkpoint=str(checkpoint))
        run.dataset_digest = _prepared_info(pdir)["dataset_digest"]
        _write_report(run, report)
        click.echo(format_table([report]), nl=False)


@cli.command("ablate")
@_common
@_train_options
@click.option("--split", type=click.Choice(SPLITS), help="Split to score (default test).")
def ablate_cmd(config_path, seed, out, runs_root, prepared, model, epochs, batch_size, lr, optimizer, weights, override_weights, checkpoint_every, split):
    """Train one model kind with and without sentiment and compare the two."""
    o = _train_overrides(seed, model, None, epochs, batch_size, lr, optimizer, weights, override_weights, checkpoint_every)
    o.update({"paths.prepared": prepared, "evaluate.split": split})
    cfg = RunConfig.load(config_path, o)
    pdir = _require_dir(cfg["paths"]["prepared"], "prepared", "prepare.json")
    with run_directory("ablate", cfg, out, runs_root) as run:
        run.inputs["prepared"] = str(pdir)
        run.dataset_digest = _prepared_info(pdir)["dataset_digest"]
        reports = []
        for prefix, with_sent in (("with_sentiment", True), ("without_sentiment", False)):
            ckpt = _train_model(run, cfg, pdir, with_sent, prefix)
            rep = _evaluate_checkpoint(cfg, ckpt, pdir, cfg["evaluate"]["split"])
            _write_report(run, rep, prefix)
            reports.append(rep)
        run.write_json("comparison.json", ablation_report(*reports))
        table = format_table(reports)
        run.file("table.txt").write_text(table)
        click.echo(table, nl=False)


@cli.command("gradcheck")
@click.option("--model", "kinds", type=click.Choice(KINDS), multiple=True, help="Restrict to these models.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
@click.option("--step", type=float, default=1e-5, show_default=True)
def gradcheck_cmd(kinds, seed, tolerance, step):
    """Verify every model gradient against central differences (reduced sizes)."""
    failed = []
    for kind in kinds or KINDS:
        rep = model_gradcheck(kind, seed=seed, step=step, tolerance=tolerance)
        name, err = rep.worst()
        status = "PASS" if rep.passed else "FAIL"
        click.echo(f"{status} {kind:<9} entries={rep.checked:<6} max_rel_err={rep.max_rel_error:.3e} worst={name}")
        if not rep.passed:
            failed.append(kind)
    if failed:
        raise NumericalError(f"gradient check failed for {', '.join(failed)}")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="eapred", standalone_mode=False)
    except EapredError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
