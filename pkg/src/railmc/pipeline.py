"""End-to-end wiring: series stores, training bundles, and batch evaluation.

A *store* is the serialized form of the ingested delay series, grouped per
train with the planned station sequence. A *bundle* holds the recovered
transition matrices per train and station, plus the training metadata needed
to reproduce it. Both are plain JSON with sorted keys so identical runs are
byte-identical.
"""

from __future__ import annotations

import datetime as dt
import json
import zlib

import numpy as np

from .config import RunConfig
from .core import (
    DelaySeries,
    RowStatus,
    StateSpace,
    TransitionMatrix,
    build_count_tensor,
)
from .evaluate import ScoreReport, marginal_predictor, naive_predictor, score_batch
from .forecast import MetricConfig, Prediction, make_prediction, point_delay, propagate
from .ingest import (
    JourneyTemplate,
    RealizationEvent,
    RejectedRow,
    StationKey,
    assemble_series,
    select_target_station,
)
from .mctest import aggregate_reports, markov_property_test
from .recovery import (
    diagonal_fill,
    empirical_matrix,
    gaussian_regression_fill,
    kde_fit,
    kde_matrix,
    uniform_fill,
)

__all__ = [
    "CoverageError",
    "EmptySelectionError",
    "build_store",
    "save_json",
    "load_json",
    "store_series",
    "store_template",
    "test_store",
    "train_bundle",
    "bundle_matrices",
    "forecast_from_bundle",
    "evaluate_store",
]

BASELINES = ("naive", "marginal")


class CoverageError(RuntimeError):
    """The bundle lacks a matrix for a station on the propagation path."""


class EmptySelectionError(RuntimeError):
    """No series matched the requested selection."""


def build_store(
    templates: dict[str, JourneyTemplate],
    events: list[RealizationEvent],
    config: RunConfig,
) -> tuple[dict, list[RejectedRow]]:
    """Assemble parsed events into the serializable series store."""
    space = StateSpace(config.n_max)
    by_train: dict[str, list[RealizationEvent]] = {}
    rejects: list[RejectedRow] = []
    for ev in events:
        if ev.train_id not in templates:
            rejects.append(RejectedRow(f"{ev.train_id},{ev.date}", "train not in timetable"))
            continue
        by_train.setdefault(ev.train_id, []).append(ev)

    trains: dict = {}
    for tid in sorted(by_train):
        template = templates[tid]
        series, train_rejects = assemble_series(
            by_train[tid], template, space, clip_mode=config.clip_mode
        )
        rejects.extend(train_rejects)
        trains[tid] = {
            "stations": [[k.station_code, k.activity] for k in template.keys],
            "planned": [p.isoformat() for p in template.planned],
            "series": [
                {"date": s.date, "delays": list(s.delays), "clipped": s.clipped}
                for s in series
            ],
        }
    return {"n_max": config.n_max, "trains": trains}, rejects


def save_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def store_series(store: dict, train_id: str) -> list[DelaySeries]:
    entry = store["trains"][train_id]
    return [
        DelaySeries(train_id, s["date"], tuple(s["delays"]), clipped=s.get("clipped", 0))
        for s in entry["series"]
    ]


def store_template(store: dict, train_id: str) -> JourneyTemplate:
    entry = store["trains"][train_id]
    return JourneyTemplate(
        train_id=train_id,
        keys=tuple(StationKey(c, a) for c, a in entry["stations"]),
        planned=tuple(dt.datetime.fromisoformat(p) for p in entry["planned"]),
    )


def test_store(store: dict, config: RunConfig) -> dict:
    """Run the Markov property test per (train, station) and aggregate."""
    if not store["trains"]:
        raise EmptySelectionError("store holds no trains")
    per_station = []
    reports = []
    for tid in sorted(store["trains"]):
        series = store_series(store, tid)
        if not series:
            continue
        max_len = max(len(s) for s in series)
        for t in range(2, max_len + 1):
            counts = build_count_tensor(series, t)
            report = markov_property_test(
                counts, config.alpha1, config.alpha2, config.statistic
            )
            reports.append(report)
            per_station.append({"train": tid, **report.to_dict()})
    if not reports:
        raise EmptySelectionError("no testable stations in store")
    return {"per_station": per_station, "aggregate": aggregate_reports(reports)}


def _kde_seed(run_seed: int, train_id: str, t: int) -> np.random.SeedSequence:
    # stable per (train, station) fan-out of the run seed
    return np.random.SeedSequence([run_seed, zlib.crc32(train_id.encode()), t])


def _recover(
    series: list[DelaySeries], t: int, space: StateSpace, config: RunConfig, train_id: str
) -> TransitionMatrix | None:
    counts = build_count_tensor(series, t)
    if config.strategy == "gaussian_kernel":
        pairs = np.array(
            [(s.delays[t - 2], s.delays[t - 1]) for s in series if len(s) >= t],
            dtype=float,
        )
        if len(pairs) == 0:
            return None
        model = kde_fit(
            pairs, epsilon=config.epsilon,
            seed=_kde_seed(config.seed, train_id, t), station_index=t,
        )
        return kde_matrix(model, space)
    partial = empirical_matrix(counts, space)
    if config.strategy == "diagonal":
        return diagonal_fill(partial)
    if config.strategy == "uniform":
        return uniform_fill(partial)
    return gaussian_regression_fill(partial, counts, space, std_form=config.regression_std)


def train_bundle(store: dict, config: RunConfig, jobs: int = 1) -> dict:
    """Recover transition matrices for every (train, station) in the store.

    Trains are independent; `jobs` > 1 recovers them concurrently. Results are
    assembled in sorted train order, so the bundle is identical either way.
    """
    if not store["trains"]:
        raise EmptySelectionError("store holds no trains")
    space = StateSpace(config.n_max)

    def build(tid: str) -> dict:
        series = store_series(store, tid)
        if not series:
            return {}
        matrices: dict = {}
        max_len = max(len(s) for s in series)
        for t in range(2, max_len + 1):
            mat = _recover(series, t, space, config, tid)
            if mat is not None:
                matrices[str(t)] = [[float(p) for p in row] for row in mat.probs]
        return matrices

    tids = sorted(store["trains"])
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            built = dict(zip(tids, pool.map(build, tids)))
    else:
        built = {tid: build(tid) for tid in tids}
    trains = {tid: {"matrices": m} for tid, m in built.items() if m}
    if not trains:
        raise EmptySelectionError("no trainable stations in store")
    return {
        "meta": {
            "n_max": config.n_max,
            "strategy": config.strategy,
            "epsilon": config.epsilon,
            "seed": config.seed,
        },
        "trains": trains,
    }


def bundle_matrices(bundle: dict, train_id: str, s: int, t: int) -> list[TransitionMatrix]:
    """The propagation chain P(S+1) .. P(T) for one train."""
    if train_id not in bundle["trains"]:
        raise CoverageError(f"bundle has no matrices for train {train_id}")
    k = 2 * bundle["meta"]["n_max"] + 1
    entry = bundle["trains"][train_id]["matrices"]
    chain = []
    for station in range(s + 1, t + 1):
        rows = entry.get(str(station))
        if rows is None:
            raise CoverageError(f"bundle misses station {station} for train {train_id}")
        chain.append(
            TransitionMatrix(station, np.asarray(rows), tuple([RowStatus.RECOVERED] * k))
        )
    return chain


def _metric_config(config: RunConfig) -> MetricConfig:
    return MetricConfig(
        trend_metric=config.trend_metric,
        jump_metric=config.jump_metric,
        minutes_metric=config.minutes_metric,
    )


def forecast_from_bundle(
    bundle: dict, train_id: str, s: int, d_s: int, t: int, config: RunConfig
) -> Prediction:
    """Propagate the current delay through the bundle and extract predictions."""
    space = StateSpace(bundle["meta"]["n_max"])
    chain = bundle_matrices(bundle, train_id, s, t)
    v = propagate(point_delay(d_s, space, station_index=s), chain)
    return make_prediction(v, d_s, space, _metric_config(config))


def _resolve_target(store: dict, train_id: str, s: int, config: RunConfig, target: int | None) -> int:
    if target is not None:
        return target
    template = store_template(store, train_id)
    return select_target_station(
        template, s, dt.timedelta(minutes=config.horizon_minutes)
    )


def evaluate_store(
    eval_store: dict,
    config: RunConfig,
    bundle: dict | None = None,
    baseline: str | None = None,
    train_store: dict | None = None,
    from_station: int = 1,
    target: int | None = None,
) -> tuple[ScoreReport, dict]:
    """Predict every series in the store and score against realized delays.

    Exactly one of `bundle` or `baseline` drives the predictions; the marginal
    baseline additionally needs the training store it draws counts from.
    Series too short to reach the target, and trains the bundle does not
    cover, are skipped; an empty surviving batch is an error.
    """
    if (bundle is None) == (baseline is None):
        raise ValueError("provide exactly one of bundle or baseline")
    if baseline is not None and baseline not in BASELINES:
        raise ValueError(f"unknown baseline {baseline!r}")
    if baseline == "marginal" and train_store is None:
        raise ValueError("marginal baseline needs a training store")

    space = StateSpace(eval_store["n_max"])
    cfg_metrics = _metric_config(config)
    predictions: list[Prediction] = []
    actuals: list[int] = []
    detail = []
    skipped = 0
    for tid in sorted(eval_store["trains"]):
        try:
            t_target = _resolve_target(eval_store, tid, from_station, config, target)
        except ValueError:
            skipped += 1
            continue
        marginal_counts = None
        if baseline == "marginal":
            if tid not in train_store["trains"]:
                skipped += 1
                continue
            marginal_counts = build_count_tensor(store_series(train_store, tid), t_target)
            if not marginal_counts.n1:
                skipped += 1
                continue
        for s in store_series(eval_store, tid):
            if len(s) < t_target or len(s) < from_station:
                skipped += 1
                continue
            d_s = s.delays[from_station - 1]
            d_t = s.delays[t_target - 1]
            try:
                if baseline == "naive":
                    pred = naive_predictor(d_s, space)
                elif baseline == "marginal":
                    pred = marginal_predictor(marginal_counts, d_s, space, cfg_metrics)
                else:
                    pred = forecast_from_bundle(bundle, tid, from_station, d_s, t_target, config)
            except CoverageError:
                skipped += 1
                continue
            predictions.append(pred)
            actuals.append(d_t)
            detail.append(
                {"train": tid, "date": s.date, "S": from_station, "T": t_target,
                 "d_S": d_s, "d_T": d_t, "trend": pred.trend, "jump": pred.jump,
                 "minutes": pred.minutes}
            )
    if not predictions:
        raise EmptySelectionError("no series could be evaluated")
    report = score_batch(predictions, actuals, rwmse_form=config.rwmse_form)
    payload = {
        "method": baseline or bundle["meta"]["strategy"],
        "skipped": skipped,
        "scores": report.to_dict(),
        "predictions": detail,
    }
    return report, payload
