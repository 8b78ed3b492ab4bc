"""
Evaluation of a trained checkpoint and single-image prediction.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from ctclassifier.data.batches import batches
from ctclassifier.data.dataset import LABELS, LabeledDataset, label_name
from ctclassifier.data.images import decode_and_resize
from ctclassifier.errors import DatasetError, UndefinedMetricError
from ctclassifier.models.checkpoint import Checkpoint
from ctclassifier.models.network import Network
from ctclassifier.models.zoo import model_channels, model_image_size
from ctclassifier.nn.losses import cross_entropy_loss
from ctclassifier.train.metrics import ConfusionMatrix, MetricsReport, compute_auc
from ctclassifier.utils.logger import get_logger

logger = get_logger(__name__)

COVID = LABELS["covid"]
DEFAULT_THRESHOLD = 0.5
EVAL_BATCH_SIZE = 32


@dataclass(frozen=True)
class Prediction:
    label: str
    covid_probability: float

    def to_line(self) -> str:
        return f"{self.label}\t{self.covid_probability:.6f}"


def _as_network(model: Union[Checkpoint, Network]) -> Network:
    return model.network() if isinstance(model, Checkpoint) else model


def classify(covid_probability: float, threshold: float = DEFAULT_THRESHOLD) -> str:
    """COVID iff the COVID probability reaches the threshold."""
    return label_name(COVID if covid_probability >= threshold else 1 - COVID)


def evaluate(model: Union[Checkpoint, Network], ds: LabeledDataset, threshold: float = DEFAULT_THRESHOLD,
             batch_size: int = EVAL_BATCH_SIZE) -> MetricsReport:
    """
    Confusion counts, accuracy, precision, recall, F1, AUC and mean loss on a dataset.

    Parameters are only read; the forward pass runs in eval mode without augmentation.
    AUC is None when the dataset holds a single class.

    Raises:
        DatasetError: empty dataset
    """
    if len(ds) == 0:
        raise DatasetError("cannot evaluate on an empty dataset")
    network = _as_network(model)

    scores: List[float] = []
    labels: List[int] = []
    loss_sum = 0.0
    for x, y in batches(ds, batch_size, target=model_image_size(network.spec),
                        channels=model_channels(network.spec), dtype=network.dtype):
        probs = network.predict_proba(x)
        loss, _ = cross_entropy_loss(probs, y)
        loss_sum += loss * len(y)
        scores.extend(float(p) for p in probs[:, COVID])
        labels.extend(int(label) for label in np.argmax(y, axis=1))

    predicted = [COVID if s >= threshold else 1 - COVID for s in scores]
    cm = ConfusionMatrix.from_predictions(labels, predicted)
    try:
        auc = compute_auc(zip(scores, labels))
    except UndefinedMetricError as e:
        logger.warning(f"AUC undefined, omitted from the report: {e}")
        auc = None

    report = MetricsReport.from_confusion(cm, auc, loss_sum / len(ds))
    logger.info(
        f"Evaluated {len(ds)} images: accuracy {report.accuracy:.4f}, f1 {report.f1:.4f}, "
        f"auc {'n/a' if auc is None else f'{auc:.4f}'}"
    )
    return report


def predict(model: Union[Checkpoint, Network], image_path: Union[str, Path],
            threshold: float = DEFAULT_THRESHOLD) -> Prediction:
    """
    Classify one image with a single eval-mode forward pass.

    Raises:
        DecodeError: the image cannot be decoded
        ShapeError: the checkpoint does not accept the resized image
    """
    network = _as_network(model)
    pixels = decode_and_resize(image_path, model_image_size(network.spec), model_channels(network.spec))
    probs = network.predict_proba(pixels[None, ...])
    covid_probability = float(np.clip(probs[0, COVID], 0.0, 1.0))
    return Prediction(classify(covid_probability, threshold), covid_probability)
