"""Network architectures and forward passes.

Inheritance path: five per-component encoders (stride r) -> latent exchange
according to the control vector -> spatial integration at box positions ->
decoder conditioned on age/gender label maps and a noise map.

Attribute path: a bottleneck encoder-decoder conditioned on the 5-dim label
encoding, re-rendering an intermediate face under a requested age/gender.

Plus the adversaries: a patch critic emitting a 2x2 score map, a scalar
discriminator for the attribute module, frozen age/gender classifiers, and a
fixed two-tap convolutional feature extractor for perceptual distances.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .geometry import ComponentLayout, ControlVector
from .labels import AttributeLabel

LABEL_DIM = 5  # 4 one-hot age dims + 1 gender scalar


class NetworkError(ValueError):
    pass


def to_tensor(face: np.ndarray) -> torch.Tensor:
    """HxWx3 [0,1] array (or a batch of them) -> (B,3,H,W) float tensor."""
    arr = np.asarray(face, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def to_image(batch: torch.Tensor) -> np.ndarray:
    """(B,3,H,W) or (3,H,W) tensor -> HxWx3 float64 array(s) in [0,1]."""
    t = batch.detach().cpu()
    if t.ndim == 3:
        t = t[None]
    arr = t.numpy().astype(np.float64).transpose(0, 2, 3, 1)
    arr = np.clip(arr, 0.0, 1.0)
    return arr[0] if arr.shape[0] == 1 else arr


def encode_labels(labels: AttributeLabel | Sequence[AttributeLabel], batch: int) -> torch.Tensor:
    """(B, 5) label encodings; a single label broadcasts over the batch."""
    if isinstance(labels, AttributeLabel):
        labels = [labels] * batch
    if len(labels) != batch:
        raise NetworkError(f"got {len(labels)} labels for batch of {batch}")
    return torch.from_numpy(np.stack([l.encode() for l in labels]))


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.norm1 = nn.InstanceNorm2d(channels, affine=True)
        self.norm2 = nn.InstanceNorm2d(channels, affine=True)

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return F.relu(x + h)


class ComponentEncoder(nn.Module):
    """Patch encoder: log2(stride) downsampling convs then 3 residual blocks."""

    def __init__(self, latent_channels: int, stride: int, base_channels: int = 16):
        super().__init__()
        if stride not in (1, 2, 4):
            raise NetworkError(f"stride must be 1, 2 or 4, got {stride}")
        downs = []
        ch_in = 3
        n_down = int(round(np.log2(stride))) if stride > 1 else 0
        widths = [base_channels * (2**k) for k in range(n_down)]
        if widths:
            widths[-1] = latent_channels
        for ch_out in widths:
            downs += [nn.Conv2d(ch_in, ch_out, 3, 2, 1), nn.ReLU(inplace=True)]
            ch_in = ch_out
        if not widths:
            downs += [nn.Conv2d(3, latent_channels, 3, 1, 1), nn.ReLU(inplace=True)]
            ch_in = latent_channels
        self.down = nn.Sequential(*downs)
        self.blocks = nn.Sequential(*[ResidualBlock(ch_in) for _ in range(3)])

    def forward(self, x):
        return self.blocks(self.down(x))


class InheritanceDecoder(nn.Module):
    """Latent canvas (+ label and noise maps) -> face in [0,1]."""

    def __init__(self, latent_channels: int, noise_channels: int, stride: int):
        super().__init__()
        width = latent_channels
        self.head = nn.Sequential(
            nn.Conv2d(latent_channels + LABEL_DIM + noise_channels, width, 3, 1, 1),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.Sequential(*[ResidualBlock(width) for _ in range(3)])
        ups = []
        ch_in = width
        n_up = int(round(np.log2(stride))) if stride > 1 else 0
        for k in range(n_up):
            ch_out = max(8, ch_in * 3 // 4)
            ups += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(ch_in, ch_out, 3, 1, 1),
                nn.ReLU(inplace=True),
            ]
            ch_in = ch_out
        self.up = nn.Sequential(*ups)
        self.out = nn.Conv2d(ch_in, 3, 3, 1, 1)

    def forward(self, x):
        h = self.up(self.blocks(self.head(x)))
        return (torch.tanh(self.out(h)) + 1.0) / 2.0


class InheritanceNet(nn.Module):
    """Five component encoders plus the shared decoder."""

    def __init__(self, latent_channels: int = 32, noise_channels: int = 8, stride: int = 4):
        super().__init__()
        self.latent_channels = latent_channels
        self.noise_channels = noise_channels
        self.stride = stride
        self.encoders = nn.ModuleDict(
            {str(i): ComponentEncoder(latent_channels, stride) for i in range(1, 6)}
        )
        self.decoder = InheritanceDecoder(latent_channels, noise_channels, stride)


class AttributeNet(nn.Module):
    """Bottleneck encoder-decoder conditioned on the 5-dim label encoding.

    The encoder runs 5 conv stages, each followed by max-pooling, then one
    fully connected stage to a d-vector; the decoder mirrors it.
    """

    CHANNELS = (16, 32, 64, 96, 128)

    def __init__(self, canvas_size: int, latent_dim: int = 64):
        super().__init__()
        if canvas_size % 32 != 0:
            raise NetworkError(f"canvas size must divide by 32, got {canvas_size}")
        self.canvas_size = canvas_size
        self.latent_dim = latent_dim
        convs = []
        ch_in = 3
        for ch_out in self.CHANNELS:
            convs += [nn.Conv2d(ch_in, ch_out, 3, 1, 1), nn.ReLU(inplace=True), nn.MaxPool2d(2)]
            ch_in = ch_out
        self.encoder_convs = nn.Sequential(*convs)
        self.bottom = canvas_size // 32
        flat = self.CHANNELS[-1] * self.bottom * self.bottom
        self.enc_fc = nn.Linear(flat, latent_dim)
        self.dec_fc = nn.Linear(latent_dim + LABEL_DIM, flat)
        deconvs = []
        chans = list(self.CHANNELS[::-1]) + [16]
        for ch_in, ch_out in zip(chans[:-1], chans[1:]):
            deconvs += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(ch_in, ch_out, 3, 1, 1),
                nn.ReLU(inplace=True),
            ]
        self.decoder_convs = nn.Sequential(*deconvs)
        self.out = nn.Conv2d(16, 3, 3, 1, 1)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        h = self.encoder_convs(x)
        return self.enc_fc(h.flatten(1))

    def decode(self, z: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        h = self.dec_fc(torch.cat([z, labels.to(z.dtype)], dim=1))
        h = h.view(z.shape[0], self.CHANNELS[-1], self.bottom, self.bottom)
        h = self.decoder_convs(F.relu(h))
        return (torch.tanh(self.out(h)) + 1.0) / 2.0


class PatchCritic(nn.Module):
    """Convolutional critic scoring realism as a 2x2 map of real values."""

    def __init__(self, base_channels: int = 16):
        super().__init__()
        b = base_channels
        self.features = nn.Sequential(
            nn.Conv2d(3, b, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(b, 2 * b, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(2 * b, 4 * b, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
        )
        self.pool = nn.AdaptiveAvgPool2d((2, 2))
        self.score = nn.Conv2d(4 * b, 1, 1)

    def forward(self, x):
        return self.score(self.pool(self.features(x))).squeeze(1)


class AttributeDiscriminator(nn.Module):
    """Scalar sigmoid discriminator for the attribute module."""

    def __init__(self, base_channels: int = 16):
        super().__init__()
        b = base_channels
        self.features = nn.Sequential(
            nn.Conv2d(3, b, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(b, 2 * b, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(2 * b, 4 * b, 4, 2, 1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.AdaptiveAvgPool2d(1),
        )
        self.fc = nn.Linear(4 * b, 1)

    def forward(self, x):
        h = self.features(x).flatten(1)
        return torch.sigmoid(self.fc(h)).squeeze(1)


class _DownBlock(nn.Module):
    def __init__(self, ch_in, ch_out):
        super().__init__()
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, 2, 1)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, 1, 1)
        self.skip = nn.Conv2d(ch_in, ch_out, 1, 2)

    def forward(self, x):
        h = F.relu(self.conv1(x))
        h = self.conv2(h)
        return F.relu(h + self.skip(x))


class _SmallResNet(nn.Module):
    """Residual classifier backbone for the frozen attribute constraints."""

    def __init__(self, out_dim: int):
        super().__init__()
        self.stem = nn.Sequential(nn.Conv2d(3, 16, 3, 2, 1), nn.ReLU(inplace=True))
        self.blocks = nn.Sequential(_DownBlock(16, 32), _DownBlock(32, 64))
        self.head = nn.Linear(64, out_dim)

    def forward(self, x):
        h = self.blocks(self.stem(x))
        h = F.adaptive_avg_pool2d(h, 1).flatten(1)
        return self.head(h)


class AgeClassifier(nn.Module):
    def __init__(self):
        super().__init__()
        self.net = _SmallResNet(4)

    def forward(self, x):
        return F.softmax(self.net(x), dim=1)


class GenderClassifier(nn.Module):
    def __init__(self):
        super().__init__()
        self.net = _SmallResNet(1)

    def forward(self, x):
        return torch.sigmoid(self.net(x)).squeeze(1)


# VGG19 conv layout: convs per block, reference channel widths.
_VGG_BLOCKS = (2, 2, 4, 4, 4)
_VGG_CHANNELS = (64, 128, 256, 512, 512)


class PerceptualExtractor(nn.Module):
    """Fixed feature extractor with taps after conv2_2 and conv5_4.

    With width=1.0 and pretrained=True, tries to load torchvision's
    pretrained 19-layer weights; otherwise (or when loading fails, e.g.
    offline) falls back to a fixed-seed random initialization, which keeps
    every perceptual-distance identity intact.
    """

    def __init__(self, width: float = 0.125, pretrained: bool = False, seed: int = 0):
        super().__init__()
        self.width = width
        self.pretrained = False
        widths = [max(4, int(c * width)) for c in _VGG_CHANNELS]
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            layers: list[nn.Module] = []
            taps: dict[str, int] = {}
            ch_in = 3
            for block, (n_convs, ch_out) in enumerate(zip(_VGG_BLOCKS, widths)):
                for conv in range(n_convs):
                    layers += [nn.Conv2d(ch_in, ch_out, 3, 1, 1), nn.ReLU(inplace=True)]
                    ch_in = ch_out
                    if (block, conv) == (1, 1):  # conv2_2 activation
                        taps["tap22"] = len(layers) - 1
                    if (block, conv) == (4, 3):  # conv5_4 activation
                        taps["tap54"] = len(layers) - 1
                if block < len(_VGG_BLOCKS) - 1:
                    layers.append(nn.MaxPool2d(2))
            self.features = nn.Sequential(*layers)
        self.tap22_index = taps["tap22"]
        self.tap54_index = taps["tap54"]
        if pretrained and width == 1.0:
            self.pretrained = self._try_load_vgg19()
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def _try_load_vgg19(self) -> bool:
        try:
            from torchvision.models import VGG19_Weights, vgg19

            src = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).features
            convs_src = [m for m in src if isinstance(m, nn.Conv2d)]
            convs_dst = [m for m in self.features if isinstance(m, nn.Conv2d)]
            for a, b in zip(convs_src, convs_dst):
                b.weight.data.copy_(a.weight.data)
                b.bias.data.copy_(a.bias.data)
            return True
        except Exception:
            return False

    def forward(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        taps = {}
        h = x
        for idx, layer in enumerate(self.features):
            h = layer(h)
            if idx == self.tap22_index:
                taps["tap22"] = h
            if idx == self.tap54_index:
                taps["tap54"] = h
        return taps


# ---------------------------------------------------------------------------
# Forward-pass operations
# ---------------------------------------------------------------------------


def profile_patch(faces: torch.Tensor, layout: ComponentLayout) -> torch.Tensor:
    """Faces with component boxes 1-4 filled with black masks."""
    out = faces.clone()
    for i in range(1, 5):
        rows, cols = layout.box_slices(i)
        out[:, :, rows, cols] = 0.0
    return out


def _latent_box(layout: ComponentLayout, component: int, stride: int):
    top, left, h, w = layout.boxes[component]
    for value, what in ((top, "top"), (left, "left"), (h, "height"), (w, "width")):
        if value % stride != 0:
            raise NetworkError(
                f"component {component} {what}={value} is not divisible by stride {stride}"
            )
    return top // stride, left // stride, h // stride, w // stride


def encode_components(
    faces: torch.Tensor, layout: ComponentLayout, net: InheritanceNet
) -> dict[int, torch.Tensor]:
    """Encode each component patch with its own encoder.

    The profile patch is the face with boxes 1-4 blacked out. Returns a map
    component index -> (B, c, h_i/r, w_i/r) feature tensor.
    """
    s = layout.canvas_size
    if faces.ndim != 4 or faces.shape[1] != 3 or faces.shape[2:] != (s, s):
        raise NetworkError(f"expected (B,3,{s},{s}) faces, got {tuple(faces.shape)}")
    latents: dict[int, torch.Tensor] = {}
    for i in range(1, 5):
        rows, cols = layout.box_slices(i)
        latents[i] = net.encoders[str(i)](faces[:, :, rows, cols])
    latents[5] = net.encoders["5"](profile_patch(faces, layout))
    for i in range(1, 6):
        _, _, h, w = _latent_box(layout, i, net.stride)
        if latents[i].shape[2:] != (h, w):
            raise NetworkError(
                f"component {i} latent is {tuple(latents[i].shape[2:])}, expected {(h, w)}"
            )
    return latents


def exchange_latents(
    a: Mapping[int, torch.Tensor], b: Mapping[int, torch.Tensor], v: ControlVector
) -> tuple[dict[int, torch.Tensor], dict[int, torch.Tensor]]:
    """Swap per-component latents where the control bit is 1.

    Pure selection: every returned feature map is one of the input tensors.
    The first combination follows v, the second follows its inverse;
    applying the exchange twice with the same v is the identity.
    """
    for i in range(1, 6):
        if a[i].shape != b[i].shape:
            raise NetworkError(
                f"latent shape mismatch for component {i}: {tuple(a[i].shape)} vs {tuple(b[i].shape)}"
            )
    comb_m = {i: (b[i] if v[i] == 1 else a[i]) for i in range(1, 6)}
    comb_f = {i: (a[i] if v[i] == 1 else b[i]) for i in range(1, 6)}
    return comb_m, comb_f


def exchange_latents_batch(
    a: Mapping[int, torch.Tensor], b: Mapping[int, torch.Tensor], bits: torch.Tensor
) -> tuple[dict[int, torch.Tensor], dict[int, torch.Tensor]]:
    """Per-sample latent exchange for a batch with one control vector each.

    bits is (B, 5) with entries in {0, 1}; sample k swaps component i when
    bits[k, i-1] is 1. Values are selected, never mixed.
    """
    comb_m, comb_f = {}, {}
    for i in range(1, 6):
        if a[i].shape != b[i].shape:
            raise NetworkError(
                f"latent shape mismatch for component {i}: {tuple(a[i].shape)} vs {tuple(b[i].shape)}"
            )
        mask = bits[:, i - 1].view(-1, 1, 1, 1).bool()
        comb_m[i] = torch.where(mask, b[i], a[i])
        comb_f[i] = torch.where(mask, a[i], b[i])
    return comb_m, comb_f


def integrate_features(
    latents: Mapping[int, torch.Tensor],
    layout: ComponentLayout,
    labels: AttributeLabel | Sequence[AttributeLabel],
    noise: torch.Tensor | None,
    stride: int,
) -> torch.Tensor:
    """Assemble the decoder input canvas.

    The profile latent is the base; component latents overwrite their scaled
    box regions. Age (4 one-hot channels), gender (1 channel) and the noise
    map are concatenated along channels.
    """
    base = latents[5]
    batch, channels, hh, ww = base.shape
    s = layout.canvas_size
    if (hh, ww) != (s // stride, s // stride):
        raise NetworkError(f"profile latent {hh}x{ww} does not match canvas/{stride}")
    canvas = base.clone()
    for i in range(1, 5):
        top, left, h, w = _latent_box(layout, i, stride)
        canvas[:, :, top : top + h, left : left + w] = latents[i]
    enc = encode_labels(labels, batch).to(canvas.dtype)
    label_maps = enc[:, :, None, None].expand(batch, LABEL_DIM, hh, ww)
    if noise is None:
        noise = torch.zeros(batch, 0, hh, ww, dtype=canvas.dtype)
    if noise.shape[0] != batch or noise.shape[2:] != (hh, ww):
        raise NetworkError(
            f"noise shape {tuple(noise.shape)} incompatible with latent canvas {(batch, hh, ww)}"
        )
    return torch.cat([canvas, label_maps, noise.to(canvas.dtype)], dim=1)


def _noise_map(
    net: InheritanceNet, batch: int, hh: int, ww: int, noise: torch.Tensor | None
) -> torch.Tensor:
    if noise is None:
        return torch.zeros(batch, net.noise_channels, hh, ww)
    if noise.ndim == 3:
        noise = noise[None].expand(batch, *noise.shape)
    if noise.shape[1] != net.noise_channels:
        raise NetworkError(
            f"noise has {noise.shape[1]} channels, net expects {net.noise_channels}"
        )
    return noise


def inheritance_forward(
    face_m: torch.Tensor,
    face_f: torch.Tensor,
    v: ControlVector,
    labels_m: AttributeLabel | Sequence[AttributeLabel],
    labels_f: AttributeLabel | Sequence[AttributeLabel],
    layout: ComponentLayout,
    net: InheritanceNet,
    noise_m: torch.Tensor | None = None,
    noise_f: torch.Tensor | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Full inheritance pass: encode, exchange per v, integrate, decode.

    The first output decodes the combination that follows v with the male
    labels/noise; the second decodes the inverse combination with the female
    ones. Swapping the two faces while inverting v leaves both outputs
    unchanged.
    """
    lat_m = encode_components(face_m, layout, net)
    lat_f = encode_components(face_f, layout, net)
    comb_m, comb_f = exchange_latents(lat_m, lat_f, v)
    hh = layout.canvas_size // net.stride
    batch = face_m.shape[0]
    out_m = net.decoder(
        integrate_features(
            comb_m, layout, labels_m, _noise_map(net, batch, hh, hh, noise_m), net.stride
        )
    )
    out_f = net.decoder(
        integrate_features(
            comb_f, layout, labels_f, _noise_map(net, batch, hh, hh, noise_f), net.stride
        )
    )
    return out_m, out_f


def attribute_forward(
    faces: torch.Tensor,
    labels: AttributeLabel | Sequence[AttributeLabel],
    net: AttributeNet,
) -> torch.Tensor:
    """Re-render faces under the requested age/gender."""
    s = net.canvas_size
    if faces.shape[2:] != (s, s):
        raise NetworkError(f"expected {s}x{s} input, got {tuple(faces.shape[2:])}")
    z = net.encode(faces)
    return net.decode(z, encode_labels(labels, faces.shape[0]))


def critic_forward(faces: torch.Tensor, critic: PatchCritic) -> torch.Tensor:
    """(B, 2, 2) realism score map for any canvas size >= 32."""
    if faces.shape[2] < 32 or faces.shape[3] < 32:
        raise NetworkError(f"critic needs a canvas >= 32, got {tuple(faces.shape[2:])}")
    return critic(faces)


def classify_age(faces: torch.Tensor, classifier: AgeClassifier) -> torch.Tensor:
    return classifier(faces)


def classify_gender(faces: torch.Tensor, classifier: GenderClassifier) -> torch.Tensor:
    return classifier(faces)
