"""Run-directory stages: generate, ingest, embed, features, analyze, train, isolate, report.

Each stage reads what earlier stages wrote under ``out`` and records its
outputs in ``out/manifest.json`` with sha256 digests, the config hash and the
seed. A run directory is bound to one (config hash, seed) pair; reusing it
with a different configuration is refused.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from . import analyses
from ._index import DAY
from .accounts import AccountLog
from .config import ConfigError, RunConfig
from .embeddings import EmbeddingSpace, TasteIndex, read_corpus_jsonl, train_track_embeddings, write_corpus_jsonl
from .engagement import PlaybackLog
from .features import (FEATURE_COLUMNS, ExtractionContext, build_dataset, group_indices, read_dataset,
                       to_matrix, write_dataset)
from .model import (ForestModel, cross_validate, feature_set_isolation, fit_forest, mdi_importance,
                    random_search_cv, write_isolation_table)
from .multiplex import LayerKind, MultiplexNetwork
from .shares import (decile_edges, filter_discovery_shares, load_aliases, read_shares_jsonl,
                     stratified_sample_by_artist, write_shares_jsonl)

log = logging.getLogger(__name__)

STAGES = ("generate", "ingest", "embed", "features", "analyze", "train", "isolate", "report")
INPUT_FILES = ("network.jsonl", "playlists.jsonl", "playback.jsonl", "accounts.jsonl", "shares.jsonl")
MANIFEST = "manifest.json"


class DataError(RuntimeError):
    """Missing or malformed inputs (CLI exit code 3)."""


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


class Run:
    """A run directory bound to one configuration."""

    def __init__(self, cfg: RunConfig, out):
        self.cfg = cfg
        self.out = Path(out)
        self.manifest_path = self.out / MANIFEST

    # -- manifest -------------------------------------------------------
    def _manifest(self) -> dict:
        if self.manifest_path.exists():
            m = json.loads(self.manifest_path.read_text())
            if m.get("config_hash") != self.cfg.hash() or m.get("seed") != self.cfg.seed:
                raise ConfigError(f"{self.out} was created with config hash {m.get('config_hash', '?')[:12]} "
                                  f"and seed {m.get('seed')}; use a fresh --out directory")
            return m
        return {"config_hash": self.cfg.hash(), "seed": self.cfg.seed, "config": self.cfg.to_dict(),
                "stages": {}}

    def check(self) -> None:
        self._manifest()

    def _record(self, stage: str, paths) -> None:
        m = self._manifest()
        m["stages"][stage] = {"artifacts": {str(Path(p).relative_to(self.out)): sha256(p)
                                            for p in sorted(map(Path, paths))},
                              "config_hash": self.cfg.hash(), "seed": self.cfg.seed}
        self.out.mkdir(parents=True, exist_ok=True)
        _dump(m, self.manifest_path)

    def path(self, *parts) -> Path:
        return self.out.joinpath(*parts)

    def dir(self, name) -> Path:
        d = self.out / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def need(self, *parts, stage: str) -> Path:
        p = self.path(*parts)
        if not p.exists():
            raise DataError(f"missing {p}; run `{stage}` first")
        return p

    def inputs_dir(self) -> Path:
        return Path(self.cfg.paths.inputs) if self.cfg.paths.inputs else self.out / "inputs"

    # -- stages ---------------------------------------------------------
    def run(self, stage: str):
        if stage not in STAGES:
            raise ConfigError(f"unknown command {stage!r}")
        self.check()
        log.info("stage %s -> %s", stage, self.out)
        paths = getattr(self, f"stage_{stage}")()
        self._record(stage, paths)
        return paths

    def stage_generate(self):
        from .synth import generate

        scfg = self.cfg.synth_config()
        sw = generate(scfg)
        d = self.dir("inputs")
        sw.world.network.to_jsonl(d / "network.jsonl")
        write_corpus_jsonl(sw.world.playlists, d / "playlists.jsonl")
        sw.playback.to_jsonl(d / "playback.jsonl")
        sw.world.accounts.to_jsonl(d / "accounts.jsonl")
        write_shares_jsonl(sw.events, d / "shares.jsonl")
        t = self.dir("truth")
        sw.truth.save(t / "ground_truth.npz")
        _dump({"synth_config": scfg.to_dict(), **sw.truth.summary(),
               "kind_counts": pd.Series(sw.kind).value_counts().sort_index().to_dict()}, t / "summary.json")
        log.info("generated %d share events (bayes auc %.4f)", len(sw.events), sw.truth.bayes_auc)
        return [d / f for f in INPUT_FILES] + [t / "ground_truth.npz", t / "summary.json"]

    def stage_ingest(self):
        src = self.inputs_dir()
        missing = [f for f in INPUT_FILES if not (src / f).exists()]
        if missing:
            raise DataError(f"missing inputs in {src}: {missing}")
        try:
            net = MultiplexNetwork.from_jsonl(src / "network.jsonl")
            shares = read_shares_jsonl(src / "shares.jsonl")
            playback = PlaybackLog.from_jsonl(src / "playback.jsonl")
            accounts = AccountLog.from_jsonl(src / "accounts.jsonl")
            corpus = read_corpus_jsonl(src / "playlists.jsonl")
        except (ValueError, KeyError) as exc:
            raise DataError(f"schema violation: {exc}") from None
        if len(shares) and net.n_events(LayerKind.LINK_SHARE):
            # pre-period shares live in network.jsonl; in-period ones come from shares.jsonl
            _, _, ts = net.layer_arrays(LayerKind.LINK_SHARE)
            if ts.max() >= shares["share_ts"].min():
                raise DataError("network.jsonl link shares overlap the share-event period")
        net.ingest_arrays(LayerKind.LINK_SHARE, shares["sender"].to_numpy(), shares["receiver"].to_numpy(),
                          shares["share_ts"].to_numpy())
        d = self.dir("store")
        net.save(d / "network.npz")
        playback.save(d / "playback.npz")
        accounts.to_jsonl(d / "accounts.jsonl")
        write_shares_jsonl(shares, d / "shares.jsonl")
        write_corpus_jsonl(corpus, d / "playlists.jsonl")
        log.info("ingested %d shares, %d plays, %d interactions", len(shares), len(playback), net.n_events())
        return [d / f for f in ("network.npz", "playback.npz", "accounts.jsonl", "shares.jsonl", "playlists.jsonl")]

    def _taste_window(self):
        a = self.cfg.analysis
        return a.start_ts - a.taste_window_days * DAY, a.start_ts

    def stage_embed(self):
        corpus = read_corpus_jsonl(self.need("store", "playlists.jsonl", stage="ingest"))
        playback = PlaybackLog.load(self.need("store", "playback.npz", stage="ingest"))
        ecfg = dataclasses.replace(self.cfg.embedding, seed=self.cfg.module_seed("embedding"))
        space = train_track_embeddings(corpus, ecfg)
        taste = TasteIndex.from_playback(space, playback, self._taste_window(), dedup=self.cfg.analysis.dedup_taste)
        d = self.dir("embed")
        space.save_text(d / "track_vectors.txt")
        taste.save(d / "taste.npz")
        log.info("embedded %d tracks, %d taste vectors", len(space), len(taste.user_ids))
        return [d / "track_vectors.txt", d / "taste.npz"]

    def _load_taste(self) -> TasteIndex:
        space = EmbeddingSpace.load_text(self.need("embed", "track_vectors.txt", stage="embed"))
        return TasteIndex.load(self.need("embed", "taste.npz", stage="embed"), space)

    def context(self) -> ExtractionContext:
        aliases = load_aliases(self.cfg.paths.aliases) if self.cfg.paths.aliases else None
        return ExtractionContext(
            MultiplexNetwork.load(self.need("store", "network.npz", stage="ingest")),
            self._load_taste(),
            PlaybackLog.load(self.need("store", "playback.npz", stage="ingest")),
            AccountLog.from_jsonl(self.need("store", "accounts.jsonl", stage="ingest")),
            self.cfg.analysis.start_ts, aliases)

    def stage_features(self):
        ctx = self.context()
        shares = read_shares_jsonl(self.need("store", "shares.jsonl", stage="ingest"))
        a = self.cfg.analysis
        period = (shares["share_ts"] >= a.start_ts) & (shares["share_ts"] < a.start_ts + a.days * DAY)
        events = filter_discovery_shares(shares.loc[period].reset_index(drop=True), ctx.playback)
        n_disc = len(events)
        s = self.cfg.sampling
        if s.cap_per_bin is not None and len(events):
            edges = decile_edges(events["artist_popularity_rank"].to_numpy(), s.n_bins)
            events = stratified_sample_by_artist(events, edges, s.cap_per_bin, self.cfg.module_seed("sampling"))
        ds, report = build_dataset(events, ctx)
        d = self.dir("features")
        write_dataset(ds, d / "dataset.csv", d / "schema.json")
        _dump({"n_shares": len(shares), "n_in_period": int(period.sum()), "n_discovery": n_disc,
               **report.to_dict()}, d / "report.json")
        log.info("dataset: %d examples, positive rate %.3f, drops %s", report.n_examples,
                 report.positive_rate, report.drops)
        return [d / "dataset.csv", d / "schema.json", d / "report.json"]

    def dataset(self) -> pd.DataFrame:
        return read_dataset(self.need("features", "dataset.csv", stage="features"))

    def stage_analyze(self):
        ds = self.dataset()
        if len(ds) == 0:
            raise DataError("empty dataset")
        net = MultiplexNetwork.load(self.need("store", "network.npz", stage="ingest"))
        res = analyses.compute_all(ds, net, self._load_taste(), self.cfg.stats, self.cfg.module_seed("analyze"))
        return analyses.write_all(res, self.dir("figures"))

    def _hyperparams(self):
        return dataclasses.replace(self.cfg.model.hyperparams, seed=self.cfg.module_seed("forest"))

    def stage_train(self):
        X, y = to_matrix(self.dataset())
        m = self.cfg.model
        hp = self._hyperparams()
        d = self.dir("model")
        paths = []
        if m.search:
            res = random_search_cv(X, y, m.search_space, m.n_fits, m.folds, self.cfg.module_seed("search"),
                                   base=hp, n_jobs=m.n_jobs)
            hp = dataclasses.replace(res.best, seed=hp.seed)
            paths.append(_dump({"best": res.best.to_dict(), "ledger": res.ledger}, d / "search.json"))
        report = cross_validate(X, y, hp, m.folds, self.cfg.module_seed("cv"), n_jobs=m.n_jobs)
        model = fit_forest(X, y, hp, feature_names=FEATURE_COLUMNS, groups=group_indices(), n_jobs=m.n_jobs)
        model.save(d / "model.npz")
        paths.append(_dump({"hyperparams": hp.to_dict(), "k": m.folds,
                            **report.to_dict()}, d / "cv.json"))
        log.info("cv roc_auc %.4f +- %.4f", report.mean("roc_auc"), report.stderr("roc_auc"))
        return paths + [d / "model.npz"]

    def _final_hyperparams(self):
        """Hyperparameters chosen by ``train`` (search result when enabled)."""
        cv = self.path("model", "cv.json")
        if cv.exists():
            from .model import Hyperparams
            return Hyperparams(**json.loads(cv.read_text())["hyperparams"])
        return self._hyperparams()

    def stage_isolate(self):
        X, y = to_matrix(self.dataset())
        rows = feature_set_isolation(X, y, group_indices(), self._final_hyperparams(), self.cfg.model.folds,
                                     self.cfg.module_seed("isolate"), n_jobs=self.cfg.model.n_jobs)
        d = self.dir("isolate")
        write_isolation_table(rows, d / "table2.csv")
        return [d / "table2.csv"]

    def stage_report(self):
        model = ForestModel.load(self.need("model", "model.npz", stage="train"))
        imp = mdi_importance(model)
        group_of = {i: g for g, idx in model.groups.items() for i in idx}
        order = np.argsort(-imp, kind="stable")
        fig9 = pd.DataFrame({"rank": np.arange(1, len(imp) + 1),
                             "feature": [model.feature_names[i] for i in order],
                             "group": [group_of.get(int(i), "") for i in order],
                             "importance": imp[order]})
        d = self.dir("report")
        fig9.to_csv(d / "fig9.csv", index=False, float_format="%.10g")
        summary = {"mdi_top": fig9["feature"].head(5).tolist()}
        for name, parts in (("cv", ("model", "cv.json")), ("features", ("features", "report.json")),
                            ("truth", ("truth", "summary.json"))):
            p = self.path(*parts)
            if p.exists():
                summary[name] = json.loads(p.read_text())
        table = self.path("isolate", "table2.csv")
        if table.exists():
            summary["isolation"] = pd.read_csv(table).to_dict(orient="records")
        return [d / "fig9.csv", _dump(summary, d / "summary.json")]


def run(command: str, cfg: RunConfig, out) -> list:
    """Run one stage, or every stage in order for ``all``."""
    r = Run(cfg, out)
    if command == "all":
        stages = STAGES if cfg.paths.inputs is None else STAGES[1:]
        return [p for s in stages for p in r.run(s)]
    return r.run(command)
