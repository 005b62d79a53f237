"""
CNN residual compacta usada como classificador sob análise.

Arquitetura: conv 3x3 de entrada; 3 estágios com um bloco residual de 2 convs cada
(larguras 16/32/64, stride 2 na entrada dos estágios 2 e 3 com projeção 1x1 no atalho);
pooling médio global; camada linear para n_classes. Sem normalização.
"""

from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from loguru import logger
from torch import nn

from fqlab.core.exceptions import FqlabError
from fqlab.schemas.training import TrainConfig


ARCHITECTURE_NAME = "compact_resnet"
DEFAULT_WIDTHS: Tuple[int, int, int] = (16, 32, 64)


class ModelError(FqlabError, ValueError):
    """Exceção para entradas ou parâmetros incompatíveis com o modelo."""
    pass


class ResidualBlock(nn.Module):
    """Duas convs 3x3 com atalho identidade (ou projeção 1x1 quando o shape muda)."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, kernel_size=3, stride=1, padding=1)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Conv2d(in_channels, out_channels, kernel_size=1, stride=stride)
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.conv1(x))
        out = self.conv2(out)
        return F.relu(out + self.shortcut(x))


class CompactResNet(nn.Module):
    """Classificador residual compacto."""

    def __init__(self, in_channels: int = 1, n_classes: int = 4, widths: Sequence[int] = DEFAULT_WIDTHS):
        super().__init__()
        if n_classes < 2:
            raise ModelError(f"n_classes deve ser pelo menos 2, recebido {n_classes}")
        if in_channels < 1:
            raise ModelError(f"in_channels deve ser positivo, recebido {in_channels}")
        w1, w2, w3 = (int(w) for w in widths)
        self.in_channels = int(in_channels)
        self.n_classes = int(n_classes)
        self.widths = (w1, w2, w3)

        self.stem = nn.Conv2d(in_channels, w1, kernel_size=3, padding=1)
        self.stage1 = ResidualBlock(w1, w1, stride=1)
        self.stage2 = ResidualBlock(w1, w2, stride=2)
        self.stage3 = ResidualBlock(w2, w3, stride=2)
        self.head = nn.Linear(w3, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.stem(x))
        out = self.stage3(self.stage2(self.stage1(out)))
        out = out.mean(dim=(-2, -1))
        return self.head(out)

    def descriptor(self) -> Dict:
        """Descritor da arquitetura (nomes e shapes dos parâmetros em ordem)."""
        return {
            "architecture": ARCHITECTURE_NAME,
            "in_channels": self.in_channels,
            "n_classes": self.n_classes,
            "widths": list(self.widths),
            "parameters": [
                {"name": name, "shape": list(param.shape)} for name, param in self.named_parameters()
            ],
        }


def _initialize(model: CompactResNet) -> None:
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
            nn.init.zeros_(module.bias)
        elif isinstance(module, nn.Linear):
            nn.init.normal_(module.weight, mean=0.0, std=0.01)
            nn.init.zeros_(module.bias)


def init_model(
    n_classes: int,
    seed: int,
    in_channels: int = 1,
    widths: Sequence[int] = DEFAULT_WIDTHS,
) -> CompactResNet:
    """
    Criar um modelo com inicialização determinística.

    Convs com pesos normais escalados pelo fan-in, vieses zerados e cabeça de média zero.
    O estado global do RNG do torch não é alterado.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        model = CompactResNet(in_channels=in_channels, n_classes=n_classes, widths=widths)
        _initialize(model)
    logger.debug(f"🧠 Modelo inicializado: {count_parameters(model)} parâmetros (seed={seed})")
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _param_dtype(model: nn.Module) -> torch.dtype:
    return next(model.parameters()).dtype


def as_batch(model: CompactResNet, batch: Union[np.ndarray, torch.Tensor]) -> torch.Tensor:
    """Validar e converter um batch (N, C, H, W) para o dtype dos parâmetros."""
    x = torch.as_tensor(batch)
    if x.ndim != 4:
        raise ModelError(f"Batch deve ter shape (N, C, H, W), recebido {tuple(x.shape)}")
    if x.shape[1] != model.in_channels:
        raise ModelError(f"Batch com {x.shape[1]} canais, modelo espera {model.in_channels}")
    if x.shape[-1] != x.shape[-2]:
        raise ModelError(f"Imagens devem ser quadradas, recebido {x.shape[-2]}x{x.shape[-1]}")
    return x.to(_param_dtype(model))


def forward(model: CompactResNet, batch, batch_size: int = 512) -> np.ndarray:
    """Logits (N, n_classes) em modo de inferência, processando em blocos."""
    x = as_batch(model, batch)
    model.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, x.shape[0], batch_size):
            outputs.append(model(x[start:start + batch_size]))
    if not outputs:
        return np.zeros((0, model.n_classes), dtype=np.float64)
    return torch.cat(outputs).double().numpy()


def loss_and_grads(model: CompactResNet, batch, labels) -> Tuple[float, Dict[str, torch.Tensor]]:
    """
    Entropia cruzada média do batch e gradientes de todos os parâmetros.

    Raises:
        ModelError: Rótulo fora de [0, n_classes) ou tamanhos inconsistentes.
    """
    x = as_batch(model, batch)
    y = torch.as_tensor(labels, dtype=torch.int64)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ModelError(f"Rótulos {tuple(y.shape)} incompatíveis com batch de {x.shape[0]} imagens")
    if y.numel() and (int(y.min()) < 0 or int(y.max()) >= model.n_classes):
        raise ModelError(f"Rótulo inválido: esperado em [0, {model.n_classes})")

    model.train()
    model.zero_grad(set_to_none=True)
    loss = F.cross_entropy(model(x), y)
    loss.backward()
    grads = {name: param.grad.detach().clone() for name, param in model.named_parameters()}
    return float(loss.detach()), grads


def make_optimizer(model: CompactResNet, config: Optional[TrainConfig] = None) -> torch.optim.SGD:
    """SGD com momentum e weight decay aplicado ao gradiente (v ← m·v + g + wd·θ; θ ← θ − lr·v)."""
    config = config or TrainConfig()
    return torch.optim.SGD(
        model.parameters(),
        lr=config.lr,
        momentum=config.momentum,
        dampening=0.0,
        weight_decay=config.weight_decay,
        nesterov=False,
    )


def sgd_step(
    model: CompactResNet,
    grads: Dict[str, torch.Tensor],
    optimizer: torch.optim.SGD,
    lr: Optional[float] = None,
) -> Tuple[CompactResNet, torch.optim.SGD]:
    """Aplicar um passo de SGD com os gradientes dados; o estado de momentum fica no otimizador."""
    params = dict(model.named_parameters())
    missing = sorted(set(params) - set(grads))
    if missing:
        raise ModelError(f"Gradientes ausentes para: {', '.join(missing)}")
    for name, param in params.items():
        if grads[name].shape != param.shape:
            raise ModelError(f"Gradiente de {name} com shape {tuple(grads[name].shape)}, esperado {tuple(param.shape)}")
        param.grad = grads[name].to(param.dtype)
    if lr is not None:
        for group in optimizer.param_groups:
            group["lr"] = lr
    optimizer.step()
    return model, optimizer
