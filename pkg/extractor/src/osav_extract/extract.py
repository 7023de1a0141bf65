"""Capture classifier activations for an image dataset and write OSAV v1.

The extractor forward-passes every sample of an ImageFolder-style dataset
through a trained model and records either the raw class logits or the
penultimate-layer features (the input to the final linear head). Rows are
emitted in dataset iteration order with shuffling disabled, so repeated
runs of the same weights on the same data produce identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torchvision import datasets, models, transforms

from .writer import write_osav

LAYERS = ("logits", "penultimate")


class ExtractionError(RuntimeError):
    """Model/dataset loading or shape failures during extraction."""


@dataclass(frozen=True)
class ExtractionJob:
    """Everything needed for one extraction run.

    ``architecture`` is either a torchvision model name (e.g. "resnet18")
    or "torchscript" to load ``weights_path`` with torch.jit.load.
    ``data_root`` points at an ImageFolder tree (class-per-subdirectory);
    ``split`` optionally names a subdirectory of it (train/val/...).
    """

    architecture: str
    weights_path: str | None
    data_root: str
    output_path: str
    split: str | None = None
    layer: str = "logits"
    batch_size: int = 32
    device: str = "cpu"
    image_size: int = 32
    normalize: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        if self.layer not in LAYERS:
            raise ExtractionError(f"unknown layer selector {self.layer!r}")
        if self.batch_size < 1:
            raise ExtractionError("batch_size must be positive")


def load_model(job: ExtractionJob) -> nn.Module:
    if job.architecture == "torchscript":
        if not job.weights_path:
            raise ExtractionError("torchscript architecture needs weights_path")
        try:
            model = torch.jit.load(job.weights_path, map_location=job.device)
        except (OSError, RuntimeError, ValueError) as exc:
            raise ExtractionError(f"cannot load torchscript model: {exc}") from exc
    else:
        try:
            model = models.get_model(job.architecture, weights=None)
        except ValueError as exc:
            raise ExtractionError(f"unknown architecture {job.architecture!r}") from exc
        if job.weights_path:
            try:
                state = torch.load(job.weights_path, map_location=job.device)
            except (OSError, RuntimeError) as exc:
                raise ExtractionError(f"cannot load weights: {exc}") from exc
            model.load_state_dict(state)
    model.to(job.device)
    model.eval()
    return model


def load_dataset(job: ExtractionJob) -> datasets.ImageFolder:
    root = Path(job.data_root)
    if job.split:
        root = root / job.split
    if not root.is_dir():
        raise ExtractionError(f"dataset directory not found: {root}")
    steps = [transforms.Resize((job.image_size, job.image_size)), transforms.ToTensor()]
    if job.normalize is not None:
        mean, std = job.normalize
        steps.append(transforms.Normalize(mean, std))
    try:
        return datasets.ImageFolder(str(root), transform=transforms.Compose(steps))
    except FileNotFoundError as exc:
        raise ExtractionError(f"empty or malformed image folder: {exc}") from exc


def _last_linear(model: nn.Module) -> nn.Linear:
    last = None
    for module in model.modules():
        if isinstance(module, nn.Linear):
            last = module
    if last is None:
        # Scripted modules hide their submodule types and cannot run
        # Python hooks inside the interpreter, so they fall in here too.
        raise ExtractionError(
            "penultimate capture needs an eager model with a linear class "
            "head to hook; use layer='logits' for this model"
        )
    return last


def extract(job: ExtractionJob, model: nn.Module | None = None) -> tuple[int, int, float]:
    """Run the job; returns (N, K, closed-set accuracy) after writing.

    K always equals the model's class-head width. For penultimate capture
    the feature width must equal K as well (the downstream revision
    operates on K-length vectors); otherwise logits must be used. A
    pre-built ``model`` skips loading and is used as given (eval mode is
    still enforced).
    """
    if model is None:
        model = load_model(job)
    else:
        model.to(job.device)
        model.eval()
    dataset = load_dataset(job)
    loader = torch.utils.data.DataLoader(
        dataset, batch_size=job.batch_size, shuffle=False, num_workers=0
    )

    captured: list[torch.Tensor] = []
    hook_handle = None
    if job.layer == "penultimate":
        head = _last_linear(model)
        hook_handle = head.register_forward_hook(
            lambda module, inputs, output: captured.append(inputs[0].detach())
        )

    rows: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    correct = 0
    head_width: int | None = None
    try:
        with torch.no_grad():
            for images, targets in loader:
                captured.clear()
                logits = model(images.to(job.device))
                if logits.ndim != 2:
                    raise ExtractionError(
                        f"model output has shape {tuple(logits.shape)}, expected (B, K)"
                    )
                head_width = int(logits.shape[1])
                if job.layer == "penultimate":
                    if not captured:
                        raise ExtractionError("forward pass never reached the class head")
                    feats = captured[-1]
                    if feats.ndim != 2 or feats.shape[1] != head_width:
                        raise ExtractionError(
                            f"penultimate width {tuple(feats.shape)[-1]} != class-head "
                            f"width {head_width}; rerun with layer='logits'"
                        )
                    batch = feats
                else:
                    batch = logits
                rows.append(batch.cpu().numpy().astype(np.float32))
                labels.append(targets.numpy().astype(np.int32))
                correct += int((logits.argmax(dim=1).cpu() == targets).sum())
    finally:
        if hook_handle is not None:
            hook_handle.remove()

    acts = np.concatenate(rows, axis=0)
    labs = np.concatenate(labels, axis=0)
    if labs.max(initial=-1) >= acts.shape[1]:
        raise ExtractionError(
            f"dataset has {len(dataset.classes)} classes but the model head "
            f"is only {acts.shape[1]} wide; labels would be out of range"
        )
    if not np.all(np.isfinite(acts)):
        raise ExtractionError("model produced non-finite activations; aborting")

    write_osav(acts, labs, job.output_path)
    accuracy = correct / len(dataset)
    print(
        f"wrote {job.output_path}: N={acts.shape[0]}, K={acts.shape[1]}, "
        f"closed-set accuracy={accuracy:.4f}"
    )
    return acts.shape[0], acts.shape[1], accuracy
