# Импорт необходимых библиотек
import math                                        # Число шагов в эпохе
import time                                        # Длительность обучения
from concurrent.futures import ThreadPoolExecutor  # Параллельная подготовка срезов
from dataclasses import dataclass, field          # Результат обучения
from pathlib import Path                           # Пути к архивам и журналу

import numpy as np                                 # Генератор случайных чисел
import torch                                       # Обучение сети
import torch.nn as nn                              # Поиск слоёв BatchNorm

from data.sampling import TrainingCase, collate, sample_epoch
from network.config import NetworkConfig
from network.model import SegmentationNetwork, model_forward
from network.weights import WeightArchive, load_weights, save_archive
from training.objective import LossConfig, soft_dice, total_loss
from training.schedule import OptimState, TrainConfig, cyclic_lr, sgd_momentum_step
from utils.analytics import TrainingAnalytics
from utils.errors import TrainingDivergedError
from utils.logger import AppLogger
from utils.monitor import PerformanceMonitor

TRAINING_LOG_NAME = "training_log.jsonl"
CHECKPOINT_DIR = "checkpoints"
FINAL_NAME = "final"

# Число потоков torch при запуске процесса
DEFAULT_NUM_THREADS = torch.get_num_threads()


def set_deterministic(enabled: bool = True):
    """
    Однопоточный режим с детерминированными алгоритмами torch.

    enabled=False возвращает настройки torch по умолчанию для процесса.
    """
    torch.use_deterministic_algorithms(enabled, warn_only=True)
    torch.set_num_threads(1 if enabled else DEFAULT_NUM_THREADS)


def _trainable_batchnorms(model: nn.Module) -> list:
    """BN-слои, чьи параметры обучаются (статистика замороженных слоёв не трогается)."""
    return [(name, m) for name, m in model.named_modules()
            if isinstance(m, nn.BatchNorm2d) and m.weight.requires_grad]


def calibrate_batchnorm(model: SegmentationNetwork, batches, logger: AppLogger = None) -> SegmentationNetwork:
    """
    Точный пересчёт статистик BN по калибровочному потоку.

    Сеть прогоняется в режиме обучения (нормализация по батчу, как при
    обучении). Для каждого незамороженного BN-слоя входы всех батчей
    сливаются в float64 по формуле Чана, итог - среднее и популяционная
    дисперсия по всем пикселям потока. После пересчёта сеть переводится
    в режим фиксированной статистики.

    Args:
        model (SegmentationNetwork): Обученная сеть
        batches: Итерируемые входы (B, M, 3, H, W)

    Returns:
        SegmentationNetwork: Та же сеть в режиме eval

    Raises:
        ValueError: Пустой поток
    """
    logger = logger or AppLogger()
    # Накопленные (число пикселей, среднее, сумма квадратов отклонений) по слоям
    layers = _trainable_batchnorms(model)
    stats = {name: None for name, _ in layers}
    handles = []

    def make_hook(name):
        def hook(module, inputs):
            x = inputs[0].detach().to(torch.float64)
            values = x.transpose(0, 1).reshape(x.shape[1], -1)
            count = values.shape[1]
            mean = values.mean(dim=1)
            m2 = ((values - mean[:, None]) ** 2).sum(dim=1)
            # Слияние с накопленной статистикой по формуле Чана
            if stats[name] is None:
                stats[name] = (count, mean, m2)
                return
            n_a, mean_a, m2_a = stats[name]
            total = n_a + count
            delta = mean - mean_a
            stats[name] = (total,
                           mean_a + delta * (count / total),
                           m2_a + m2 + delta ** 2 * (n_a * count / total))
        return hook

    for name, module in layers:
        handles.append(module.register_forward_pre_hook(make_hook(name)))

    samples = 0
    try:
        model.train()
        with torch.no_grad():
            for x in batches:
                model(x)
                samples += x.shape[0]
    finally:
        for handle in handles:
            handle.remove()

    if samples == 0:
        raise ValueError("calibration stream is empty")

    with torch.no_grad():
        for name, module in layers:
            count, mean, m2 = stats[name]
            module.running_mean.copy_(mean.to(module.running_mean.dtype))
            module.running_var.copy_((m2 / count).to(module.running_var.dtype))

    model.eval()
    logger.info(f"Calibrated {len(layers)} batch-norm layers on {samples} samples")
    return model


def calibration_batches(cases: list, cfg: TrainConfig, size, rng: np.random.Generator, executor=None):
    """
    Поток батчей для калибровки: bn_calibration_samples срезов, выбранных
    так же, как при обучении.

    Yields:
        torch.Tensor: Входы (B, M, 3, H, W)
    """
    per_case = math.ceil(cfg.bn_calibration_samples / len(cases))
    samples = sample_epoch(cases, rng, per_case, cfg.tumor_fraction, size, executor)
    samples = samples[:cfg.bn_calibration_samples]
    batch_size = cfg.effective_calibration_batch_size
    for start in range(0, len(samples), batch_size):
        x, _ = collate(samples[start:start + batch_size])
        yield x


@dataclass
class TrainResult:
    """
    Итог обучения.

    Attributes:
        model (SegmentationNetwork): Обученная сеть в режиме eval
        final_path (Path): Архив финальной модели
        checkpoints (list): Пути промежуточных контрольных точек
        log_path (Path): Журнал JSON-lines
        statistics (dict): Итоги TrainingAnalytics
    """
    model: SegmentationNetwork
    final_path: Path
    checkpoints: list = field(default_factory=list)
    log_path: Path = None
    statistics: dict = field(default_factory=dict)


def train(cases: list, out_dir, network_config: NetworkConfig, train_config: TrainConfig = TrainConfig(),
          loss_config: LossConfig = LossConfig(), initial_weights: WeightArchive = None,
          logger: AppLogger = None, monitor: PerformanceMonitor = None) -> TrainResult:
    """
    Полный цикл обучения.

    Каждая эпоха: выборка срезов, перемешивание, батчи, прямой и обратный
    проход, шаг SGD с циклической скоростью. После каждой эпохи в журнал
    пишутся средний loss и мягкий Dice по классам. Контрольные точки -
    архивы весов в out_dir/checkpoints/epoch_NNNN, финальная модель после
    калибровки BN - в out_dir/final.

    Args:
        cases (list): Подготовленные TrainingCase
        out_dir: Директория результатов
        network_config (NetworkConfig): Архитектура
        train_config (TrainConfig): Параметры обучения
        loss_config (LossConfig): Параметры функции потерь
        initial_weights (WeightArchive): Предобученный энкодер или модель

    Returns:
        TrainResult

    Raises:
        TrainingDivergedError: Loss стал NaN или бесконечным
    """
    logger = logger or AppLogger()
    monitor = monitor or PerformanceMonitor()
    cfg = train_config.validate()
    loss_config.validate()
    network_config.validate()
    if not cases:
        raise ValueError("training needs at least one labelled case")
    if any(not isinstance(c, TrainingCase) for c in cases):
        raise TypeError("train expects TrainingCase instances")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    set_deterministic(cfg.deterministic)

    # Инициализация сети и загрузка предобученных весов
    torch.manual_seed(cfg.seed)
    model = SegmentationNetwork(network_config)
    if initial_weights is not None:
        load_weights(initial_weights, model, strict=True, logger=logger)
    model.train()

    optim = OptimState.create(model.named_parameters(), cfg)
    frozen = sum(p.numel() for p in model.parameters() if not p.requires_grad)
    trainable = sum(p.numel() for p in optim.parameters)
    logger.info(f"Training {network_config.variant} on {len(cases)} cases: "
                f"{trainable} trainable, {frozen} frozen parameters")
    logger.info(f"Train config: {cfg.to_dict()}")
    logger.info(f"Loss config: {loss_config.to_dict()}")

    rng = np.random.default_rng(cfg.seed)
    samples_per_epoch = len(cases) * cfg.samples_per_case
    steps_per_epoch = math.ceil(samples_per_epoch / cfg.batch_size)
    analytics = TrainingAnalytics(out_dir / TRAINING_LOG_NAME)
    checkpoints = []
    size = network_config.input_size
    executor = ThreadPoolExecutor(max_workers=cfg.jobs) if cfg.jobs > 1 else None

    try:
        for epoch in range(1, cfg.epochs + 1):
            started = time.time()
            # Новая выборка срезов на каждую эпоху
            samples = sample_epoch(cases, rng, cfg.samples_per_case, cfg.tumor_fraction, size, executor)
            order = rng.permutation(len(samples))

            loss_sum = 0.0
            dice_sum = torch.zeros(3, dtype=torch.float64)
            for start in range(0, len(order), cfg.batch_size):
                x, y = collate([samples[i] for i in order[start:start + cfg.batch_size]])
                lr = cyclic_lr(optim.step, cfg, steps_per_epoch)

                # Прямой и обратный проход
                optim.zero_grad()
                p = model_forward(model, x)
                loss = total_loss(p, y, loss_config)
                if not torch.isfinite(loss):
                    raise TrainingDivergedError(f"non-finite loss {loss.item()} at epoch {epoch}, "
                                                f"step {optim.step}")
                loss.backward()
                sgd_momentum_step(optim, lr)

                loss_sum += loss.item() * x.shape[0]
                dice_sum += soft_dice(p.detach(), y, loss_config.epsilon).to(torch.float64) * x.shape[0]

            dice = (dice_sum / len(samples)).tolist()
            record = analytics.track_epoch(epoch, optim.step, optim.lr, loss_sum / len(samples),
                                           dice, len(samples))
            logger.info(f"Epoch {epoch}/{cfg.epochs}: loss {record['loss']:.5f}, "
                        f"dice wt/tc/et {dice[0]:.4f}/{dice[1]:.4f}/{dice[2]:.4f}, "
                        f"lr {optim.lr:.3e}, {time.time() - started:.1f}s")
            monitor.log_metrics(logger)

            # Промежуточная точка со статистикой BN по EMA
            if epoch % cfg.checkpoint_interval == 0:
                path = out_dir / CHECKPOINT_DIR / f"epoch_{epoch:04d}"
                save_archive(WeightArchive.from_model(model, metadata={"epoch": epoch, "step": optim.step}),
                             path, logger)
                checkpoints.append(path)

        # Точная калибровка BN на отдельном потоке срезов
        if cfg.bn_calibration_samples > 0:
            calibration_rng = np.random.default_rng([cfg.seed, 1])
            calibrate_batchnorm(model, calibration_batches(cases, cfg, size, calibration_rng, executor), logger)
    finally:
        if executor is not None:
            executor.shutdown()

    model.eval()
    final_path = save_archive(
        WeightArchive.from_model(model, metadata={"epoch": cfg.epochs, "step": optim.step}),
        out_dir / FINAL_NAME, logger)

    statistics = analytics.get_statistics()
    averages = monitor.get_average_metrics()
    logger.info(f"Training finished: {statistics['steps']} steps, {statistics['sample_visits']} sample visits, "
                f"best dice sum {statistics['best_dice_sum']:.4f}, "
                f"peak RSS {averages.get('peak_rss_mb', 0.0):.0f} MB")
    return TrainResult(model=model, final_path=final_path, checkpoints=checkpoints,
                       log_path=analytics.log_path, statistics=statistics)
