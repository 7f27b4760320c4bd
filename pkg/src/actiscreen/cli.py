"""Command-line entry point: one subcommand per pipeline stage.

Stages talk through files. Every stage directory holds a ``manifest.json``
listing the patients with paths to upstream and own artifacts, relative
to the directory. Each run prints a single
JSON summary line on stdout; logs go to stderr.

Exit codes: 0 success, 2 invalid configuration, 3 missing input, 4 stage
failure.
"""

import argparse
import datetime
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .aggregate import aggregate_patients
from .config import dump_config, load_config
from .errors import ActiScreenError, ConfigInvalid, IngestError, InputMissing, ModelVersionError, StageFailure
from .evaluation import (
    CVReport,
    feature_ablation,
    lodo_cv,
    nested_cv,
    parallel_map,
    roc_csv,
    stability,
)
from .features import (
    NIGHT_FEATURES,
    feature_matrix,
    nights_from_json,
    nights_json_version,
    nights_to_csv,
    nights_to_json,
    registry_version,
)
from .ingest import RawRecording, parse_csv, read_act1
from .model import PipelineModel, fit_pipeline
from .process import WearTimeline, preprocess, process_recording, recording_seed, windows_from_zangle
from .signal import NS, CalibrationParams, WearSegments
from .sleep import SleepWindow, ZAngle
from .synth import write_cohort

log = logging.getLogger("actiscreen")

MANIFEST = "manifest.json"


# files ------------------------------------------------------------------------------


def _write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputMissing(f"missing input {path}") from None
    except json.JSONDecodeError as exc:
        raise InputMissing(f"unreadable JSON {path}: {exc}") from None


def _load_manifest(in_dir):
    if in_dir is None:
        raise InputMissing("--in is required")
    path = in_dir if in_dir.endswith(".json") else os.path.join(in_dir, MANIFEST)
    if not os.path.exists(path):
        raise InputMissing(f"no manifest at {path}")
    man = _read_json(path)
    root = os.path.dirname(os.path.abspath(path))
    pats = man.get("patients")
    if not isinstance(pats, list) or not pats:
        raise InputMissing(f"{path} lists no patients")
    out = []
    for p in pats:
        if "id" not in p:
            raise InputMissing(f"{path}: patient entry without an id")
        q = dict(p)
        q["files"] = [os.path.normpath(os.path.join(root, f)) for f in p.get("files", [])]
        q["artifacts"] = {k: os.path.normpath(os.path.join(root, v)) for k, v in p.get("artifacts", {}).items()}
        q.setdefault("dataset", "")
        q.setdefault("label", -1)
        out.append(q)
    return out


def _stage_manifest(stage, patients, own, out):
    """Manifest for the stage directory ``out``; ``own`` maps patient id to {name: relative path}.

    Inherited paths are stored relative to ``out`` so output bytes do not depend on where it lives.
    """
    root = os.path.abspath(out)

    def rel(path):
        return os.path.relpath(path, root)

    rows = []
    for p in patients:
        arts = {k: rel(v) for k, v in p.get("artifacts", {}).items()}
        arts.update(own.get(p["id"], {}))
        rows.append({
            "id": p["id"],
            "label": int(p["label"]),
            "dataset": p.get("dataset", ""),
            "files": [rel(f) for f in p["files"]],
            "artifacts": arts,
        })
    return {"stage": stage, "patients": rows}


def _load_recording(paths):
    if not paths:
        raise InputMissing("patient has no recording files")
    recs = []
    for f in paths:
        if not os.path.exists(f):
            raise InputMissing(f"missing recording {f}")
        if f.lower().endswith(".csv"):
            with open(f) as fh:
                recs.append(parse_csv(fh.read(), device_id=os.path.basename(f)))
        else:
            recs.append(read_act1(f))
    if len(recs) == 1:
        return recs[0]
    recs.sort(key=lambda r: int(r.t[0]))
    first = recs[0]
    if any(r.nominal_rate != first.nominal_rate or r.dynamic_range != first.dynamic_range for r in recs):
        raise IngestError("recordings of one patient differ in rate or range")
    return RawRecording(first.device_id, first.nominal_rate, first.dynamic_range,
                        np.concatenate([r.t for r in recs]), np.concatenate([r.codes for r in recs]))


def _done(out, name, force):
    path = os.path.join(out, name)
    if os.path.exists(path) and not force:
        log.warning("skipping: %s exists (use --force to recompute)", path)
        return True
    return False


def _need_out(args):
    if not args.out:
        raise ConfigInvalid("--out is required")
    os.makedirs(args.out, exist_ok=True)
    return args.out


# stages --------------------------------------------------------------------------------


def cmd_synth(args, cfg):
    out = _need_out(args)
    if _done(out, MANIFEST, args.force):
        return {"status": "skipped"}
    man = write_cohort(replace(cfg.synth, seed=args.seed), out, args.jobs)
    return {"status": "ok", "patients": len(man["patients"])}


def _preprocess_one(task):
    p, out, cfg = task
    rec = _load_recording(p["files"])
    pre = preprocess(rec, cfg.process)
    del rec
    z = pre.zangle
    zname = f"{p['id']}.zangle.npy"
    arr = np.empty(len(z.angle), dtype=[("angle", "<f8"), ("wear", "?")])
    arr["angle"] = z.angle
    arr["wear"] = z.wear
    np.save(os.path.join(out, zname), arr)
    info = {
        "patient_id": p["id"],
        "start_t": pre.sig.start_t,
        "rate": pre.sig.rate,
        "n_samples": len(pre.sig),
        "epoch_s": z.epoch_s,
        "calibration": pre.calibration.to_dict(),
        "wear": pre.wear.to_list(),
    }
    pname = f"{p['id']}.preprocess.json"
    _write_json(os.path.join(out, pname), info)
    return p["id"], {"preprocess": pname, "zangle": zname}, pre.calibration.residual_after


def cmd_preprocess(args, cfg):
    pats = _load_manifest(args.inp)
    out = _need_out(args)
    if _done(out, MANIFEST, args.force):
        return {"status": "skipped"}
    res = parallel_map(_preprocess_one, [(p, out, cfg) for p in pats], args.jobs)
    own = {pid: arts for pid, arts, _ in res}
    _write_json(os.path.join(out, MANIFEST), _stage_manifest("preprocess", pats, own, out))
    return {"status": "ok", "patients": len(res), "max_residual_mg": max(r for _, _, r in res)}


def _sleep_one(task):
    p, out, cfg = task
    a = p["artifacts"]
    if "preprocess" not in a or "zangle" not in a:
        raise InputMissing(f"patient {p['id']} has no preprocessing artifacts")
    info = _read_json(a["preprocess"])
    arr = np.load(a["zangle"])
    z = ZAngle(info["start_t"], info["epoch_s"], arr["angle"].astype(np.float64), arr["wear"].astype(bool))
    timeline = WearTimeline(info["start_t"], info["rate"], WearSegments.from_list(info["wear"]).mask(info["n_samples"]))
    wins = windows_from_zangle(z, timeline, cfg.process)
    name = f"{p['id']}.windows.jsonl"
    _write_text(os.path.join(out, name), "".join(json.dumps(_window_row(w, cfg), sort_keys=True) + "\n" for w in wins))
    return p["id"], {"windows": name}, len(wins)


def _iso(t_ns, utc_offset_s):
    tz = datetime.timezone(datetime.timedelta(seconds=utc_offset_s))
    sec, ns = divmod(int(t_ns), NS)
    return datetime.datetime.fromtimestamp(sec, tz).replace(microsecond=ns // 1000).isoformat()


def _window_row(w, cfg):
    row = w.to_dict()
    row["onset_iso"] = _iso(w.onset_t, cfg.process.utc_offset_s)
    row["wake_iso"] = _iso(w.wake_t, cfg.process.utc_offset_s)
    return row


def _read_windows(path):
    try:
        with open(path) as fh:
            return [SleepWindow.from_dict(json.loads(line)) for line in fh if line.strip()]
    except FileNotFoundError:
        raise InputMissing(f"missing input {path}") from None


def cmd_sleep(args, cfg):
    pats = _load_manifest(args.inp)
    out = _need_out(args)
    if _done(out, MANIFEST, args.force):
        return {"status": "skipped"}
    res = parallel_map(_sleep_one, [(p, out, cfg) for p in pats], args.jobs)
    own = {pid: arts for pid, arts, _ in res}
    _write_json(os.path.join(out, MANIFEST), _stage_manifest("sleep", pats, own, out))
    return {"status": "ok", "patients": len(res), "windows": sum(n for _, _, n in res)}


def _features_one(task):
    p, seed, cfg = task
    a = p["artifacts"]
    if "windows" not in a or "preprocess" not in a:
        raise InputMissing(f"patient {p['id']} has no sleep-window artifacts")
    info = _read_json(a["preprocess"])
    wins = _read_windows(a["windows"])
    rec = _load_recording(p["files"])
    nights, _ = process_recording(
        rec, p["id"], int(p["label"]), recording_seed(seed, p["id"]), cfg.process, p.get("dataset", ""),
        windows=wins, calibration=CalibrationParams.from_dict(info["calibration"]),
        wear=WearSegments.from_list(info["wear"]),
    )
    return nights


def cmd_features(args, cfg):
    pats = _load_manifest(args.inp)
    out = _need_out(args)
    if _done(out, "nights.json", args.force):
        return {"status": "skipped"}
    res = parallel_map(_features_one, [(p, args.seed, cfg) for p in pats], args.jobs)
    nights = [n for per in res for n in per]
    _write_text(os.path.join(out, "nights.csv"), nights_to_csv(nights))
    _write_json(os.path.join(out, MANIFEST), _stage_manifest("features", pats, {}, out))
    _write_text(os.path.join(out, "nights.json"), nights_to_json(nights, cfg.process.features))
    return {"status": "ok", "patients": len(pats), "nights": len(nights),
            "excluded": sum(n.excluded for n in nights)}


def _load_nights(in_dir, cfg, labelled=True):
    if in_dir is None:
        raise InputMissing("--in is required")
    path = in_dir if in_dir.endswith(".json") else os.path.join(in_dir, "nights.json")
    if not os.path.exists(path):
        raise InputMissing(f"no night features at {path}")
    with open(path) as fh:
        text = fh.read()
    version = nights_json_version(text)
    if version != registry_version(cfg.process.features):
        raise ModelVersionError(f"feature registry {version} differs from the current {registry_version(cfg.process.features)}")
    nights = [n for n in nights_from_json(text) if not n.excluded]
    if labelled:
        nights = [n for n in nights if n.label in (0, 1)]
    if not nights:
        raise InputMissing(f"{path} holds no usable nights")
    X = feature_matrix(nights, NIGHT_FEATURES)
    y = np.array([n.label for n in nights], dtype=np.int64)
    groups = np.array([n.patient_id for n in nights])
    datasets = np.array([n.dataset for n in nights])
    return nights, X, y, groups, datasets


def cmd_train(args, cfg):
    out = _need_out(args)
    if _done(out, "model.json", args.force):
        return {"status": "skipped"}
    _, X, y, groups, _ = _load_nights(args.inp, cfg)
    trials = []
    model = fit_pipeline(X, y, groups, NIGHT_FEATURES, args.seed, cfg.train, trials_out=trials)
    model.registry_version = registry_version(cfg.process.features)
    _write_json(os.path.join(out, "trials.json"),
                [{"hyperparams": hp.to_dict(), "score": s} for hp, s in trials])
    _write_text(os.path.join(out, "model.json"), model.to_json())
    return {"status": "ok", "nights": int(len(y)), "patients": int(np.unique(groups).size),
            "selected": len(model.selected), "trees": len(model.gbdt.trees)}


def cmd_predict(args, cfg):
    out = _need_out(args)
    if _done(out, "predictions.csv", args.force):
        return {"status": "skipped"}
    if not args.model:
        raise ConfigInvalid("--model is required")
    model_path = args.model if args.model.endswith(".json") else os.path.join(args.model, "model.json")
    model = PipelineModel.from_dict(_read_json(model_path))
    current = registry_version(cfg.process.features)
    if model.registry_version != current:
        raise ModelVersionError(f"model was trained on feature registry {model.registry_version}, "
                                f"current registry is {current}")
    nights, X, _, groups, _ = _load_nights(args.inp, cfg, labelled=False)
    probs = model.predict_proba(X)
    lines = ["patient_id,night_id,probability,positive"]
    for n, p in zip(nights, probs):
        lines.append(f"{n.patient_id},{n.night_id},{float(p)!r},{int(p > model.night_threshold)}")
    pats = aggregate_patients(probs, groups, model.night_threshold, model.patient_threshold)
    plines = ["patient_id,n_nights,mean_probability,majority_fraction,mean_positive,vote_positive,positive"]
    for p in pats:
        plines.append(f"{p.patient_id},{len(p.night_probs)},{p.mean_prob!r},{p.majority_fraction!r},"
                      f"{int(p.decision_mean)},{int(p.decision_vote)},{int(p.final)}")
    _write_text(os.path.join(out, "patients.csv"), "\n".join(plines) + "\n")
    _write_text(os.path.join(out, "patients.jsonl"),
                "".join(json.dumps(p.to_dict(), sort_keys=True) + "\n" for p in pats))
    _write_text(os.path.join(out, "predictions.csv"), "\n".join(lines) + "\n")
    return {"status": "ok", "nights": len(nights), "patients": len(pats),
            "positive_patients": int(sum(p.final for p in pats))}


def cmd_evaluate(args, cfg):
    out = _need_out(args)
    if _done(out, "report.json", args.force):
        return {"status": "skipped"}
    nights, X, y, groups, datasets = _load_nights(args.inp, cfg)
    if args.scheme == "nested":
        rep = nested_cv(X, y, groups, NIGHT_FEATURES, args.seed, cfg.train, cfg.evaluate.outer_folds,
                        cfg.evaluate.repeats, args.jobs)
    else:
        rep = lodo_cv(X, y, groups, datasets, NIGHT_FEATURES, args.seed, cfg.train, args.jobs,
                      cfg.evaluate.bootstrap)
    idx, pr = rep.pooled_predictions(0 if args.scheme == "nested" else None)
    _write_text(os.path.join(out, "roc_night.csv"), roc_csv(pr, y[idx]))
    pid, inv = np.unique(groups[idx], return_inverse=True)
    pm = np.bincount(inv, weights=pr) / np.bincount(inv)
    plab = np.zeros(pid.size, dtype=np.int64)
    np.maximum.at(plab, inv, y[idx])
    _write_text(os.path.join(out, "roc_patient.csv"), roc_csv(pm, plab))
    _write_text(os.path.join(out, "report.csv"), rep.to_csv())
    _write_text(os.path.join(out, "report.json"), rep.to_json())
    s = rep.summary()
    return {"status": "ok", "scheme": rep.scheme, "folds": len(rep.folds),
            "patient_auroc": s.get("patient_auroc", {}).get("mean"),
            "night_auroc": s.get("night_auroc", {}).get("mean")}


def cmd_stability(args, cfg):
    out = _need_out(args)
    if _done(out, "stability.json", args.force):
        return {"status": "skipped"}
    if args.inp is None:
        raise InputMissing("--in is required")
    path = args.inp if args.inp.endswith(".json") else os.path.join(args.inp, "report.json")
    rep = CVReport.from_dict(_read_json(path))
    st = stability(rep, NIGHT_FEATURES)
    result = st.to_dict()
    summary = {"status": "ok", "folds": len(rep.folds), "mean_stability": result["mean_stability"],
               "mean_spearman": result["mean_spearman"]}
    if args.features:
        _, X, y, groups, datasets = _load_nights(args.features, cfg)
        curve = feature_ablation(X, y, groups, datasets, NIGHT_FEATURES, st.consensus, cfg.evaluate.ablation_ks,
                                 args.seed, cfg.train, jobs=args.jobs)
        result["ablation"] = curve
        summary["ablation_points"] = len(curve)
    _write_json(os.path.join(out, "stability.json"), result)
    return summary


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic cohort (ACT1 files, truth sidecars, manifest)"),
    "preprocess": (cmd_preprocess, "resample, calibrate, detect non-wear, compute z-angle"),
    "sleep": (cmd_sleep, "detect sleep windows from the z-angle"),
    "features": (cmd_features, "band-pass, detect bouts and compute night feature vectors"),
    "train": (cmd_train, "fit the night-level model on labelled nights"),
    "predict": (cmd_predict, "score nights and patients with a trained model"),
    "evaluate": (cmd_evaluate, "nested or leave-one-dataset-out cross-validation"),
    "stability": (cmd_stability, "hyperparameter and feature-ranking stability of a CV report"),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="actiscreen", description="Nocturnal actigraphy screening pipeline.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with stage knobs")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config knob (repeatable)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--force", action="store_true", help="recompute even if outputs exist")
    common.add_argument("--in", dest="inp", help="input stage directory (or file)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "predict":
            p.add_argument("--model", help="model.json or the train output directory")
        if name == "evaluate":
            p.add_argument("--scheme", choices=("nested", "lodo"), default="nested")
        if name == "stability":
            p.add_argument("--features", help="features directory; adds the feature-count ablation")
    sub.add_parser("config", help="print the effective configuration", parents=[common])
    return ap


def run(argv=None):
    """Run one command; returns ``(exit_code, summary)``."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    summary = {"command": args.command}
    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigInvalid("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigInvalid("--jobs must be at least 1")
        cfg = load_config(args.config, args.set)
        if args.command == "config":
            sys.stderr.write(dump_config(cfg))
            summary["status"] = "ok"
            return 0, summary
        fn = COMMANDS[args.command][0]
        try:
            summary.update(fn(args, cfg))
        except (ConfigInvalid, InputMissing, StageFailure):
            raise
        except (ActiScreenError, OSError) as exc:
            raise StageFailure(args.command, exc) from exc
        return 0, summary
    except (ConfigInvalid, InputMissing, StageFailure) as exc:
        log.error("%s", exc)
        summary.update(status="error", category=type(exc).__name__, error=str(exc))
        if isinstance(exc, StageFailure):
            summary["inner"] = type(exc.inner).__name__
        return exc.exit_code, summary


def main(argv=None):
    code, summary = run(argv)
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    sys.stdout.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
