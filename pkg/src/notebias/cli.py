"""Command-line entry point: one subcommand per pipeline stage.

Every subcommand reads a YAML run config (optional), writes its artifacts
into a run directory and a ``manifest.<command>[.<tag>].json`` describing
the run. Exit codes: 0 success, 1 data or missing-input error, 2 config or
usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy
import yaml

from . import __version__
from .cohort import DEFAULT_BINS, CohortError, Document, MatchCriteria, load_codeset, read_documents
from .corpus import CleaningConfig, ingest_diagnoses, ingest_notes, ingest_patients, write_jsonl
from .debias import NameDetector, canonical_transform
from .explain import audit_influential, format_influence_table, gendered_word_check, merge_vocabularies
from .fairness import format_table, parity_report
from .lexical import PRONOUNS, GenderLexicon, TermLexicon, bin_stats, group_texts, read_word_list
from .model import PredictionRecord, TrainConfig, load_external_predictions, load_model, save_model

log = logging.getLogger("notebias")

RUN_DIR_ENV = "NOTEBIAS_RUN_DIR"
EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


class MissingInput(Exception):
    pass


# ---------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class PathsConfig:
    notes: str | None = None
    patients: str | None = None
    diagnoses: str | None = None
    codes: str | None = None
    stopwords: str | None = None
    terms: str | None = None
    first_names: str | None = None


@dataclass(frozen=True)
class CohortSection:
    bins: tuple[int, ...] = DEFAULT_BINS
    birth_window_days: int = 30
    same_sex: bool = True
    encounter_window_months: int = 18
    train_fraction: float = 0.8

    def criteria(self) -> MatchCriteria:
        return MatchCriteria(self.birth_window_days, self.same_sex, self.encounter_window_months)


@dataclass(frozen=True)
class DebiasSection:
    transforms: tuple[str, ...] = ()
    fraction: float = 0.2
    transform_test: bool = True


@dataclass(frozen=True)
class AuditSection:
    attribute: str = "sex"
    privileged: str = "M"
    threshold: float = 0.5


@dataclass(frozen=True)
class ExplainSection:
    per_class_top: int = 10
    k: int = 5
    n_samples: int = 500


@dataclass(frozen=True)
class SynthSection:
    preset: str = "table5-bin5"
    n_patients: int | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int | None = None
    threads: int = 1
    run_dir: str = "runs/default"
    paths: PathsConfig = PathsConfig()
    cleaning: CleaningConfig = CleaningConfig()
    cohort: CohortSection = CohortSection()
    debias: DebiasSection = DebiasSection()
    model: TrainConfig = TrainConfig()
    audit: AuditSection = AuditSection()
    explain: ExplainSection = ExplainSection()
    synth: SynthSection = SynthSection()

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    if origin is typing.Union or type(hint).__name__ == "UnionType":
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], where)
    if origin is tuple:
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return tuple(_coerce(v, args[0], where) for v in value)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data, where: str = "config"):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}") for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return _build(RunConfig, data)


def validate(cfg: RunConfig) -> None:
    """Checks that do not depend on the subcommand."""
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    for name in ("codes", "stopwords", "terms", "first_names"):
        p = getattr(cfg.paths, name)
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"paths.{name}: file not found: {p}")
    if not cfg.cohort.bins:
        raise ConfigError("cohort.bins must be non-empty")
    if not 0 < cfg.cohort.train_fraction < 1:
        raise ConfigError("cohort.train_fraction must lie in (0, 1)")
    if not 0 <= cfg.debias.fraction <= 1:
        raise ConfigError("debias.fraction must lie in [0, 1]")
    if not 0 <= cfg.cleaning.dedup_threshold <= 1:
        raise ConfigError("cleaning.dedup_threshold must lie in [0, 1]")
    if cfg.cleaning.recent_k < 1:
        raise ConfigError("cleaning.recent_k must be >= 1")
    try:
        for t in cfg.debias.transforms:
            canonical_transform(t)
    except ValueError as exc:
        raise ConfigError(f"debias.transforms: {exc}") from None


# ---------------------------------------------------------------------------
# run context


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _count_rows(path: Path) -> int | None:
    if path.suffix != ".jsonl":
        return None
    with open(path, encoding="utf-8") as fh:
        return sum(1 for ln in fh if ln.strip())


@dataclass
class Run:
    command: str
    config: RunConfig
    run_dir: Path
    tag: str = ""
    inputs: dict[str, int | None] = field(default_factory=dict)
    outputs: list[Path] = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)
    _resolved: set = field(default_factory=set, repr=False)

    def name(self, stem: str, suffix: str) -> Path:
        return self.run_dir / (f"{stem}.{self.tag}{suffix}" if self.tag else f"{stem}{suffix}")

    def resolve(self, given: str | None, default: str, what: str) -> Path:
        """Relative names that do not exist from the working directory are
        looked up in the run directory."""
        if given is None:
            p = self.run_dir / default
        else:
            p = Path(given)
            if not p.exists() and not p.is_absolute():
                p = self.run_dir / given
        if not p.is_file():
            raise MissingInput(f"missing {what}: {p}")
        self.inputs[str(p)] = _count_rows(p)
        self._resolved.add(p.resolve())
        return p

    def output(self, path: Path) -> Path:
        if path.resolve() in self._resolved:
            raise ConfigError(f"refusing to overwrite input {path}")
        self.outputs.append(path)
        return path

    def write_text(self, path: Path, text: str) -> None:
        self.output(path).write_text(text, encoding="utf-8")

    def write_jsonl(self, path: Path, records) -> int:
        return write_jsonl(self.output(path), records)

    def manifest(self) -> Path:
        path = self.name(f"manifest.{self.command}", ".json")
        obj = {
            "command": self.command,
            "tag": self.tag,
            "config": self.config.to_json(),
            "config_sha256": self.config.digest(),
            "versions": {
                "notebias": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pyyaml": yaml.__version__,
            },
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {
                str(p): {"rows": _count_rows(p), "sha256": _file_digest(p)}
                for p in sorted(self.outputs)
            },
            "wall_time_s": round(time.perf_counter() - self.started, 3),
        }
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _need_seed(cfg: RunConfig, command: str) -> int:
    if cfg.seed is None:
        raise ConfigError(f"{command} is stochastic: pass --seed or set seed in the config")
    return cfg.seed


def _stopwords(cfg: RunConfig):
    return read_word_list(cfg.paths.stopwords) if cfg.paths.stopwords else None


def _terms(cfg: RunConfig):
    return TermLexicon.from_file(cfg.paths.terms) if cfg.paths.terms else None


def _detector(cfg: RunConfig) -> NameDetector:
    names = read_word_list(cfg.paths.first_names) if cfg.paths.first_names else None
    return NameDetector(names, _stopwords(cfg), _terms(cfg))


def _bias_check(cfg: RunConfig):
    names = read_word_list(cfg.paths.first_names) if cfg.paths.first_names else None
    return gendered_word_check(names)


def _load(run: Run, loader, given, default, what):
    res = loader(run.resolve(given, default, what))
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return res.records


def _corpus_inputs(run: Run):
    p = run.config.paths
    patients = _load(run, ingest_patients, p.patients, "patients.jsonl", "patients file")
    notes = _load(run, ingest_notes, p.notes, "notes.jsonl", "notes file")
    diagnoses = _load(run, ingest_diagnoses, p.diagnoses, "diagnoses.jsonl", "diagnoses file")
    return patients, notes, diagnoses


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(run: Run, args) -> None:
    from .synth import SynthError, generate, preset, verify

    cfg = run.config
    seed = _need_seed(cfg, "synth")
    overrides = {"seed": seed}
    n = args.n_patients if args.n_patients is not None else cfg.synth.n_patients
    if n is not None:
        overrides["n_patients"] = n
    try:
        scfg = preset(args.preset or cfg.synth.preset, **overrides)
    except SynthError as exc:
        raise ConfigError(str(exc)) from None
    corpus = generate(scfg)
    run.write_jsonl(run.run_dir / "patients.jsonl", corpus.patients)
    run.write_jsonl(run.run_dir / "notes.jsonl", corpus.notes)
    run.write_jsonl(run.run_dir / "diagnoses.jsonl", corpus.diagnoses)
    run.write_jsonl(run.run_dir / "ground_truth.jsonl", corpus.truth)
    if args.verify:
        report = verify(corpus, scfg)
        run.write_text(run.run_dir / "synth_verify.txt", "\n".join(report.lines()) + "\n")


def cmd_ingest(run: Run, args) -> None:
    patients, notes, diagnoses = _corpus_inputs(run)
    run.write_jsonl(run.run_dir / "patients.jsonl", patients)
    run.write_jsonl(run.run_dir / "notes.jsonl", notes)
    run.write_jsonl(run.run_dir / "diagnoses.jsonl", diagnoses)


def cmd_cohort(run: Run, args) -> None:
    from .pipeline import cohort_documents

    cfg = run.config
    seed = _need_seed(cfg, "cohort")
    codes = load_codeset(cfg.paths.codes)
    patients, notes, diagnoses = _corpus_inputs(run)
    docs = cohort_documents(
        patients, notes, diagnoses, cfg.cohort.bins, codes, cfg.cohort.criteria(),
        cfg.cleaning, cfg.cohort.train_fraction, seed, cfg.threads,
    )
    run.write_jsonl(run.run_dir / "documents.jsonl", docs)
    lines = ["bin  cases  controls  train  test"]
    for b in sorted({d.bin for d in docs}):
        in_bin = [d for d in docs if d.bin == b]
        lines.append(
            f"{b:3d}  {sum(d.y for d in in_bin):5d}  {sum(1 - d.y for d in in_bin):8d}  "
            f"{sum(d.split == 'train' for d in in_bin):5d}  {sum(d.split == 'test' for d in in_bin):4d}"
        )
    run.write_text(run.run_dir / "cohort.txt", "\n".join(lines) + "\n")


def _documents(run: Run, args) -> list[Document]:
    return read_documents(run.resolve(args.documents, "documents.jsonl", "documents file"))


def cmd_stats(run: Run, args) -> None:
    cfg = run.config
    docs = _documents(run, args)
    attribute = args.attribute or cfg.audit.attribute
    gender = GenderLexicon(PRONOUNS, _detector(cfg))
    rows, tables = [], []
    for b in sorted({d.bin for d in docs}):
        stats = bin_stats(group_texts((d for d in docs if d.bin == b), attribute),
                          _terms(cfg), gender, _stopwords(cfg))
        rows.append({"bin": b, "attribute": attribute, **stats.to_json()})
        tables.append(stats.table(str(b)))
    run.write_jsonl(run.name("stats", ".jsonl"), rows)
    run.write_text(run.name("stats", ".txt"), "\n".join(tables))


def cmd_debias(run: Run, args) -> None:
    from .pipeline import debias_documents

    cfg = run.config
    seed = _need_seed(cfg, "debias")
    names = tuple(args.transforms.split(",")) if args.transforms else cfg.debias.transforms
    try:
        names = tuple(canonical_transform(n.strip()) for n in names if n.strip())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not names:
        raise ConfigError("no transforms given (--transforms or debias.transforms)")
    docs = _documents(run, args)
    out = debias_documents(docs, names, cfg.debias.fraction, seed, cfg.debias.transform_test)
    run.write_jsonl(run.run_dir / f"documents.{run.tag or 'debiased'}.jsonl", out)


def cmd_train(run: Run, args) -> None:
    from .pipeline import train_and_predict

    cfg = run.config
    docs = _documents(run, args)
    runs = train_and_predict(docs, cfg.model, cfg.seed or 0)
    records = []
    for b, br in sorted(runs.items()):
        path = run.name(f"model.bin{b}", ".json")
        save_model(br.model, run.output(path))
        records.extend(br.records)
    run.write_jsonl(run.name("predictions", ".jsonl"), records)


def _read_predictions(path: Path) -> list[PredictionRecord]:
    with open(path, encoding="utf-8") as fh:
        return [PredictionRecord.from_json(json.loads(ln)) for ln in fh if ln.strip()]


def cmd_audit(run: Run, args) -> None:
    cfg = run.config
    attribute = args.attribute or cfg.audit.attribute
    privileged = args.privileged or cfg.audit.privileged
    if args.predictions:
        docs = _documents(run, args)
        p = run.resolve(args.predictions, "", "predictions file")
        demo = {d.patient_id: d for d in docs}
        labels = {d.patient_id: (d.label, d.bin) for d in docs}
        records, warnings = load_external_predictions(p, demo, labels)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
    else:
        records = _read_predictions(run.resolve(None, run.name("predictions", ".jsonl").name, "predictions file"))
    if not records:
        raise ValueError("no usable predictions")
    reports = []
    for b in sorted({r.bin for r in records}):
        in_bin = [r for r in records if r.bin == b]
        reports.append(parity_report(in_bin, attribute, privileged, cfg.audit.threshold,
                                     bin=b, label=run.tag or "orig"))
    run.write_jsonl(run.name("parity", ".jsonl"), reports)
    run.write_text(run.name("parity", ".txt"), format_table(reports))


def cmd_explain(run: Run, args) -> None:
    cfg = run.config
    seed = _need_seed(cfg, "explain")
    docs = {d.patient_id: d.text for d in _documents(run, args)}
    records = _read_predictions(run.resolve(None, run.name("predictions", ".jsonl").name, "predictions file"))
    check = _bias_check(cfg)
    per_class: dict[str, list] = {}
    explanations = []
    for b in sorted({r.bin for r in records}):
        model = load_model(run.resolve(None, run.name(f"model.bin{b}", ".json").name, f"model for bin {b}"))
        vocabs, exps = audit_influential(
            [r for r in records if r.bin == b], docs, model.predict_texts,
            cfg.explain.per_class_top, cfg.explain.k, check, cfg.explain.n_samples, seed,
        )
        explanations.extend(exps)
        for cls, v in vocabs.items():
            per_class.setdefault(cls, []).append(v)
    merged = [merge_vocabularies(v, check) for _, v in sorted(per_class.items())]
    run.write_jsonl(run.name("explanations", ".jsonl"), explanations)
    run.write_jsonl(run.name("influence", ".jsonl"), merged)
    run.write_text(run.name("influence", ".txt"),
                   format_influence_table([(run.tag or "orig", v) for v in merged]))


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "cohort": cmd_cohort,
    "stats": cmd_stats,
    "debias": cmd_debias,
    "train": cmd_train,
    "audit": cmd_audit,
    "explain": cmd_explain,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run config")
    common.add_argument("--run-dir", help=f"output directory (default: ${RUN_DIR_ENV} or config run_dir)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="cap on worker threads")
    common.add_argument("--tag", default="", help="suffix for artifact names, e.g. 'tfidf'")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="notebias", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"notebias {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--preset")
    p.add_argument("--n-patients", type=int)
    p.add_argument("--verify", action="store_true", help="also write synth_verify.txt")

    sub.add_parser("ingest", parents=[common], help="validate and normalize corpus files")
    sub.add_parser("cohort", parents=[common], help="build matched bins and patient documents")

    p = sub.add_parser("stats", parents=[common], help="per-bin textual diagnostics")
    p.add_argument("--documents")
    p.add_argument("--attribute")

    p = sub.add_parser("debias", parents=[common], help="apply de-biasing transforms")
    p.add_argument("--documents")
    p.add_argument("--transforms", help="comma-separated, e.g. tfidf_filt,gen_sub")

    p = sub.add_parser("train", parents=[common], help="train one classifier per bin")
    p.add_argument("--documents")

    p = sub.add_parser("audit", parents=[common], help="classification-parity report")
    p.add_argument("--attribute")
    p.add_argument("--privileged")
    p.add_argument("--predictions", help="external {patient_id, probability} JSONL; skips training")
    p.add_argument("--documents", help="labels and demographics for external predictions")

    p = sub.add_parser("explain", parents=[common], help="influential-word audit")
    p.add_argument("--documents")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    updates: dict[str, Any] = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["threads"] = args.threads
    run_dir = args.run_dir or os.environ.get(RUN_DIR_ENV)
    if run_dir:
        updates["run_dir"] = run_dir
    cfg = dataclasses.replace(cfg, **updates) if updates else cfg
    validate(cfg)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.tag and not args.tag.replace("-", "").replace("_", "").isalnum():
            raise ConfigError(f"--tag must be alphanumeric, got {args.tag!r}")
        run_dir = Path(cfg.run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        run = Run(args.command, cfg, run_dir, args.tag)
        COMMANDS[args.command](run, args)
        manifest = run.manifest()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CohortError, ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for p in run.outputs:
        print(p)
    print(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
