# Импорт необходимых библиотек и модулей
import argparse                                    # Разбор аргументов командной строки
import sys                                         # Коды завершения и вывод ошибок
from concurrent.futures import ThreadPoolExecutor  # Параллельная обработка случаев
from pathlib import Path                           # Работа с путями

import numpy as np                                 # Seed для фантомов

from data.sampling import TrainingCase
from data.volumedata import (list_cases, load_case, load_case_labels,
                             generate_phantom, save_case, save_label_map, save_probability_map)
from evaluation.metrics import score_case
from evaluation.report import (SCORES_CSV, format_comparison,
                               format_report, summarize, write_report, write_scores_csv)
from inference.pipeline import NetworkPredictor, segment_volume
from network.weights import build_model, load_archive
from training.trainer import set_deterministic, train
from utils import __version__
from utils.config import env_jobs, load_environment, load_run_config
from utils.files import RunManifest, atomic_path
from utils.logger import AppLogger
from utils.monitor import PerformanceMonitor

# Суффиксы файлов вероятностей
PROBABILITY_SUFFIXES = ("prob_wt", "prob_tc", "prob_et")


def parse_shape(text: str) -> tuple:
    """Разбор размера "X,Y,Z"."""
    try:
        shape = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid shape '{text}', expected X,Y,Z") from None
    if len(shape) != 3:
        raise argparse.ArgumentTypeError(f"invalid shape '{text}', expected three integers")
    return shape


def phantom_seeds(seed: int, count: int) -> list:
    """Независимые seed для каждого фантома из одного seed запуска."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


class BrainSegApp:
    """
    Приложение командной строки.

    Связывает модули конвейера:
    - phantom: генерация синтетического набора данных
    - train: обучение сети
    - predict: сегментация случаев
    - evaluate: оценка предсказаний и сводные таблицы
    - inspect: просмотр архива весов
    """

    def __init__(self):
        self.logger = AppLogger()
        self.monitor = PerformanceMonitor()

    def _executor(self, jobs: int):
        return ThreadPoolExecutor(max_workers=jobs) if jobs and jobs > 1 else None

    def _manifest(self, args, **kwargs) -> RunManifest:
        return RunManifest(command=args.command, code_version=__version__, argv=list(args.argv), **kwargs)

    def cmd_phantom(self, args) -> int:
        out = Path(args.out)
        seed = args.seed if args.seed is not None else 0
        seeds = phantom_seeds(seed, args.count)
        self.logger.info(f"Generating {args.count} phantom cases of shape {args.shape} in {out}")

        def make(item):
            index, case_seed = item
            case_id = f"phantom_{index:03d}"
            volume, labels = generate_phantom(case_seed, shape=args.shape)
            volume.case_id = case_id
            save_case(volume, labels, out / case_id, description=f"phantom seed={case_seed}")
            return case_id

        executor = self._executor(args.jobs)
        try:
            items = list(enumerate(seeds))
            cases = list(executor.map(make, items)) if executor else [make(item) for item in items]
        finally:
            if executor:
                executor.shutdown()

        self._manifest(args, seed=seed, outputs={"dataset": str(out), "cases": cases},
                       settings={"count": args.count, "shape": list(args.shape), "case_seeds": seeds}).write(out)
        self.logger.info(f"Wrote {len(cases)} phantom cases to {out}")
        return 0

    def cmd_train(self, args) -> int:
        config = load_run_config(args.config).with_train_overrides(
            seed=args.seed, jobs=args.jobs_explicit, deterministic=args.deterministic)

        archive = None
        if args.weights:
            archive = load_archive(args.weights)
            archive.check_compatible(config.network)
            self.logger.info(f"Using {archive.scope} archive {args.weights}")

        pairs = [load_case(d, require_labels=True, logger=self.logger) for d in list_cases(args.data)]
        if not pairs:
            raise ValueError(f"no cases found in {args.data}")
        cases = [TrainingCase.prepare(volume, labels) for volume, labels in pairs]

        out = Path(args.out)
        result = train(cases, out, config.network, config.train, config.loss,
                       initial_weights=archive, logger=self.logger, monitor=self.monitor)

        self._manifest(
            args, config_path=args.config, seed=config.train.seed,
            inputs={"data": str(args.data), "weights": str(args.weights) if args.weights else None},
            outputs={"final": str(result.final_path), "log": str(result.log_path),
                     "checkpoints": [str(p) for p in result.checkpoints]},
            settings={"config": config.to_dict(), "statistics": result.statistics},
        ).write(out)
        return 0

    def cmd_predict(self, args) -> int:
        deterministic = True if args.deterministic is None else args.deterministic
        set_deterministic(deterministic)

        archive = load_archive(args.weights)
        model = build_model(archive, logger=self.logger)
        predictor = NetworkPredictor(model, batch_size=args.batch_size)
        out = Path(args.out)

        executor = self._executor(args.jobs)
        written = []
        try:
            for directory in list_cases(args.data):
                volume, _ = load_case(directory, logger=self.logger)
                labels, probs = segment_volume(predictor, volume, threshold=args.threshold,
                                               min_size=args.min_size, return_probabilities=True,
                                               executor=executor, logger=self.logger)
                case_dir = out / volume.case_id
                save_label_map(labels, case_dir / f"{volume.case_id}_seg.nii.gz")
                if args.probs:
                    for suffix, grid in zip(PROBABILITY_SUFFIXES, probs.as_array()):
                        save_probability_map(grid, volume.spacing, case_dir / f"{volume.case_id}_{suffix}.nii.gz")
                written.append(volume.case_id)
                self.logger.info(f"Predicted case {volume.case_id}")
        finally:
            if executor:
                executor.shutdown()

        self._manifest(args, inputs={"data": str(args.data), "weights": str(args.weights)},
                       outputs={"predictions": str(out), "cases": written},
                       settings={"threshold": args.threshold, "min_size": args.min_size,
                                 "batch_size": args.batch_size, "probs": args.probs,
                                 "deterministic": deterministic}).write(out)
        self.logger.info(f"Wrote {len(written)} label maps to {out}")
        return 0

    def _score_set(self, pred_dir: Path, truth_dir: Path, executor) -> list:
        """Оценки всех случаев эталона для одного набора предсказаний."""
        truth_cases = [d.name for d in list_cases(truth_dir)]
        if not truth_cases:
            raise ValueError(f"no cases found in {truth_dir}")
        unmatched = sorted({d.name for d in list_cases(pred_dir)} - set(truth_cases))
        if unmatched:
            raise ValueError(f"unmatched case '{unmatched[0]}' in {pred_dir}: no ground truth")

        def score(case_id):
            pred_case = pred_dir / case_id
            if not pred_case.is_dir():
                raise FileNotFoundError(f"missing prediction for case '{case_id}' in {pred_dir}")
            truth = load_case_labels(truth_dir / case_id)
            pred = load_case_labels(pred_case)
            scores = score_case(pred, truth, spacing=truth.spacing, case_id=case_id)
            self.logger.debug(f"Scored case {case_id}: dice et/wt/tc "
                              f"{scores.dice['et']:.4f}/{scores.dice['wt']:.4f}/{scores.dice['tc']:.4f}")
            return scores

        return list(executor.map(score, truth_cases)) if executor else [score(c) for c in truth_cases]

    def cmd_evaluate(self, args) -> int:
        truth_dir = Path(args.truth)
        out = Path(args.out)
        sets = {}
        for index, item in enumerate(args.pred):
            name, sep, path = item.partition("=")
            if not sep:
                name, path = (Path(item).name or f"set{index}"), item
            if name in sets:
                raise ValueError(f"duplicate prediction set name '{name}'")
            sets[name] = Path(path)

        executor = self._executor(args.jobs)
        reports = {}
        try:
            for name, pred_dir in sets.items():
                scores = self._score_set(pred_dir, truth_dir, executor)
                report = summarize(scores, ddof=args.ddof)
                target = out if len(sets) == 1 else out / name
                write_scores_csv(scores, target / SCORES_CSV)
                write_report(report, target)
                reports[name] = report
                self.logger.info(f"Evaluated {len(scores)} cases of '{name}'")
        finally:
            if executor:
                executor.shutdown()

        if len(reports) == 1:
            text = format_report(next(iter(reports.values())))
        else:
            text = format_comparison(reports)
            with atomic_path(out / "comparison.txt") as tmp:
                tmp.write_text(text, encoding="utf-8")
        print(text, end="")

        self._manifest(args, inputs={"truth": str(truth_dir), "predictions": {k: str(v) for k, v in sets.items()}},
                       outputs={"results": str(out)}, settings={"ddof": args.ddof}).write(out)
        return 0

    def cmd_inspect(self, args) -> int:
        archive = load_archive(args.archive)
        manifest = archive.manifest()
        print(f"Archive:      {args.archive}")
        print(f"Format:       {manifest['format']}")
        print(f"Scope:        {manifest['scope']}")
        print(f"Fingerprint:  {manifest['fingerprint']} (encoder {manifest['encoder_fingerprint']})")
        print(f"Variant:      {archive.config.variant}")
        if archive.standardization:
            print(f"Standardize:  mean {archive.standardization['mean']} std {archive.standardization['std']}")
        if archive.metadata:
            print(f"Metadata:     {archive.metadata}")
        print()

        width = max(len(e["name"]) for e in manifest["tensors"]) if manifest["tensors"] else 4
        print(f"{'name':<{width}}  {'shape':<20}  crc32")
        for entry in manifest["tensors"]:
            shape = "x".join(str(s) for s in entry["shape"]) or "scalar"
            print(f"{entry['name']:<{width}}  {shape:<20}  {entry['crc32']:08x}")
        print()

        summary = archive.summary()
        for namespace, totals in summary["namespaces"].items():
            print(f"{namespace:<12} {totals['tensors']:>6} tensors  {totals['parameters']:>12,} values")
        print(f"{'total':<12} {len(archive.tensors):>6} tensors  {summary['total']:>12,} values")
        return 0


def build_parser() -> argparse.ArgumentParser:
    """Парсер с подкомандами phantom | train | predict | evaluate | inspect."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed запуска")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="число рабочих потоков")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=argparse.SUPPRESS,
                        help="однопоточный воспроизводимый режим")

    parser = argparse.ArgumentParser(prog="brainseg", parents=[common],
                                     description="Сегментация опухолей мозга по мультимодальной МРТ")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", parents=[common], help="синтетический набор данных")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--shape", type=parse_shape, default=(64, 64, 64))

    p = sub.add_parser("train", parents=[common], help="обучение сети")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="архив предобученного энкодера или модели")

    p = sub.add_parser("predict", parents=[common], help="сегментация случаев")
    p.add_argument("--data", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--probs", action="store_true", help="записать вероятности классов")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-size", type=int, default=100)

    p = sub.add_parser("evaluate", parents=[common], help="оценка предсказаний")
    p.add_argument("--pred", required=True, action="append", help="DIR или NAME=DIR, можно несколько")
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ddof", type=int, default=0, choices=(0, 1), help="0 - популяционное отклонение")

    p = sub.add_parser("inspect", parents=[common], help="просмотр архива весов")
    p.add_argument("archive")
    return parser


def main(argv=None) -> int:
    """Точка входа: разбор аргументов, запуск подкоманды, код завершения."""
    # Значения по умолчанию из .env до создания логгера
    load_environment()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    args.seed = getattr(args, "seed", None)
    args.jobs_explicit = getattr(args, "jobs", None)
    args.jobs = args.jobs_explicit or env_jobs()
    args.deterministic = getattr(args, "deterministic", None)

    app = BrainSegApp()
    handler = getattr(app, f"cmd_{args.command}")
    app.logger.info(f"Command {args.command} started: {' '.join(argv)}")
    try:
        code = handler(args)
    except Exception as e:
        app.logger.error(f"Command {args.command} failed: {e}", exc_info=True)
        message = "; ".join(line.strip() for line in str(e).splitlines() if line.strip())
        print(f"error: {message}", file=sys.stderr)
        return 1
    app.logger.info(f"Command {args.command} finished")
    return code


if __name__ == "__main__":
    sys.exit(main())
