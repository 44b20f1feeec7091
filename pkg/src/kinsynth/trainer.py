"""Training: classifier pretraining, attribute-module pretraining, and the
joint loop with the published update schedule.

Each inheritance iteration runs the component-exchange synthesis, the critic
update(s), and one generator step; the attribute module gets one extra update
every `attr_update_period` iterations. Metrics stream to
runs/<id>/metrics.jsonl (one JSON object per step, no timestamps, so a replay
with the same config and seed is byte-identical); checkpoints land at
runs/<id>/ckpt-<iter>.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import losses as LS
from . import networks as NW
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .compositor import exchange_components
from .data import FacePool, DatasetManifest, pool_from_manifest, split_pool, toy_pool
from .geometry import ComponentLayout, component_boxes
from .labels import AGE_STAGES, AttributeLabel, GENDERS
from .losses import LossWeights

ABLATION_FLAGS = ("AD", "PI", "AG", "PE")


class TrainError(RuntimeError):
    pass


class TrainingDiverged(TrainError):
    """A loss went non-finite; the offending batch is dumped for inspection."""


@dataclass(frozen=True)
class TrainConfig:
    canvas_size: int = 64
    batch_size: int = 8
    learning_rate: float = 1e-4
    adam_betas: tuple[float, float] = (0.5, 0.9)
    weights: LossWeights = field(default_factory=LossWeights)
    iterations: int = 2000
    attr_update_period: int = 500
    critic_steps: int = 5
    seed: int = 0
    dataset: dict = field(default_factory=lambda: {"kind": "toy", "subjects": 64, "seed": 0})
    checkpoint_interval: int = 1000
    latent_channels: int = 32
    noise_channels: int = 8
    stride: int = 4
    attribute_latent_dim: int = 64
    perceptual_width: float = 0.125
    perceptual_pretrained: bool = False
    classifier_steps: int = 1500
    classifier_lr: float = 1e-3
    attr_pretrain_steps: int = 1500
    ablation: tuple[str, ...] = ABLATION_FLAGS
    run_dir: str = "runs/default"

    def __post_init__(self):
        for flag in self.ablation:
            if flag not in ABLATION_FLAGS:
                raise TrainError(f"unknown ablation flag {flag!r}; valid: {ABLATION_FLAGS}")
        if self.attr_update_period < 1:
            raise TrainError("attr_update_period must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        d["ablation"] = list(self.ablation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "weights" in d and isinstance(d["weights"], dict):
            d["weights"] = LossWeights(**d["weights"])
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        if "ablation" in d:
            d["ablation"] = tuple(d["ablation"])
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "TrainConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def model_config(self) -> dict:
        """The architecture block stored inside checkpoints."""
        return {
            "S": self.canvas_size,
            "r": self.stride,
            "c": self.latent_channels,
            "n": self.noise_channels,
            "d": self.attribute_latent_dim,
            "perceptual_width": self.perceptual_width,
            "perceptual_pretrained": self.perceptual_pretrained,
        }


def effective_weights(config: TrainConfig) -> LossWeights:
    """Loss weights after applying the ablation switches."""
    w = config.weights
    if "AD" not in config.ablation:
        w = replace(w, inheritance_adversarial=0.0, attribute_adversarial=0.0)
    if "PI" not in config.ablation:
        w = replace(w, inheritance_pixel=0.0)
    if "PE" not in config.ablation:
        w = replace(w, inheritance_perceptual=0.0, attribute_perceptual=0.0)
    return w


def attribute_update_iterations(total: int, period: int) -> list[int]:
    """Iterations (1-based) at which the attribute module is updated."""
    return [i for i in range(1, total + 1) if i % period == 0]


def parameter_hash(module: torch.nn.Module) -> str:
    digest = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(p.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


@dataclass
class ModelBundle:
    """All networks plus the layout they share."""

    layout: ComponentLayout
    inheritance: NW.InheritanceNet
    attribute: NW.AttributeNet
    critic: NW.PatchCritic
    att_disc: NW.AttributeDiscriminator
    age_clf: NW.AgeClassifier
    gender_clf: NW.GenderClassifier
    perceptual: NW.PerceptualExtractor
    model_config: dict

    @classmethod
    def build(cls, config: TrainConfig) -> "ModelBundle":
        with torch.random.fork_rng():
            torch.manual_seed(config.seed)
            bundle = cls(
                layout=component_boxes(config.canvas_size),
                inheritance=NW.InheritanceNet(
                    config.latent_channels, config.noise_channels, config.stride
                ),
                attribute=NW.AttributeNet(config.canvas_size, config.attribute_latent_dim),
                critic=NW.PatchCritic(),
                att_disc=NW.AttributeDiscriminator(),
                age_clf=NW.AgeClassifier(),
                gender_clf=NW.GenderClassifier(),
                perceptual=NW.PerceptualExtractor(
                    width=config.perceptual_width,
                    pretrained=config.perceptual_pretrained,
                    seed=config.seed,
                ),
                model_config=config.model_config(),
            )
        return bundle

    def named_modules_map(self) -> dict[str, torch.nn.Module]:
        return {
            "inheritance": self.inheritance,
            "attribute": self.attribute,
            "critic": self.critic,
            "att_disc": self.att_disc,
            "age_clf": self.age_clf,
            "gender_clf": self.gender_clf,
            "perceptual": self.perceptual,
        }

    def weights_payload(self) -> dict:
        return {name: m.state_dict() for name, m in self.named_modules_map().items()}

    def load_weights(self, payload: dict, config_block: dict):
        for key in ("S", "r", "c", "n", "d"):
            if config_block.get(key) != self.model_config.get(key):
                raise CheckpointError(
                    f"checkpoint {key}={config_block.get(key)} does not match "
                    f"current model {key}={self.model_config.get(key)}"
                )
        for name, module in self.named_modules_map().items():
            module.load_state_dict(payload[name])

    def freeze_auxiliaries(self):
        for module in (self.age_clf, self.gender_clf, self.perceptual):
            for p in module.parameters():
                p.requires_grad_(False)
            module.eval()


def load_pools(config: TrainConfig) -> tuple[FacePool, FacePool]:
    """(train, test) pools from the configured dataset source."""
    src = config.dataset
    if src.get("kind") == "toy":
        pool = toy_pool(
            subjects=int(src.get("subjects", 64)),
            canvas_size=config.canvas_size,
            seed=int(src.get("seed", 0)),
        )
    elif src.get("kind") == "manifest":
        manifest = DatasetManifest.load(src["path"])
        pool = pool_from_manifest(manifest, config.canvas_size)
    else:
        raise TrainError(f"unknown dataset source {src!r}")
    return split_pool(pool)


def _sample_subjects(pool: FacePool, rng: np.random.Generator, count: int):
    subjects = pool.subjects
    return [subjects[int(rng.integers(len(subjects)))] for _ in range(count)]


def _sample_pairs(pool: FacePool, rng: np.random.Generator, count: int):
    from .data import TrainingPair
    from .geometry import parse_control_vector

    pairs = []
    for _ in range(count):
        m = pool.males[int(rng.integers(len(pool.males)))]
        f = pool.females[int(rng.integers(len(pool.females)))]
        v = parse_control_vector(format(int(rng.integers(32)), "05b"))
        pairs.append(TrainingPair(m.face, f.face, v, m.label, f.label))
    return pairs


def _label_targets(labels: Sequence[AttributeLabel]):
    age = torch.from_numpy(np.stack([l.age_onehot() for l in labels]))
    gender = torch.tensor([l.gender_scalar() for l in labels], dtype=torch.float32)
    return age, gender


# ---------------------------------------------------------------------------
# Classifier pretraining
# ---------------------------------------------------------------------------


def classifier_accuracy(
    bundle: ModelBundle, pool: FacePool
) -> tuple[float, float]:
    """(age accuracy, gender accuracy) over a whole pool."""
    faces = NW.to_tensor(np.stack([s.face for s in pool.subjects]))
    age_true = torch.tensor([AGE_STAGES.index(s.label.age_stage) for s in pool.subjects])
    gen_true = torch.tensor([GENDERS.index(s.label.gender) for s in pool.subjects])
    with torch.no_grad():
        age_pred = bundle.age_clf(faces).argmax(dim=1)
        gen_pred = (bundle.gender_clf(faces) > 0.5).long()
    return (
        float((age_pred == age_true).float().mean()),
        float((gen_pred == gen_true).float().mean()),
    )


def pretrain_classifiers(
    config: TrainConfig,
    bundle: ModelBundle,
    train_pool: FacePool,
    val_pool: FacePool,
    log=None,
) -> dict:
    """Supervised age/gender training with early stop on validation accuracy."""
    rng = np.random.default_rng(config.seed + 101)
    opt = torch.optim.Adam(
        list(bundle.age_clf.parameters()) + list(bundle.gender_clf.parameters()),
        lr=config.classifier_lr,
    )
    ce = torch.nn.CrossEntropyLoss()
    bce = torch.nn.BCELoss()
    history = []
    for step in range(1, config.classifier_steps + 1):
        batch = _sample_subjects(train_pool, rng, max(config.batch_size, 16))
        faces = NW.to_tensor(np.stack([s.face for s in batch]))
        age_idx = torch.tensor([AGE_STAGES.index(s.label.age_stage) for s in batch])
        gen_val = torch.tensor([s.label.gender_scalar() for s in batch], dtype=torch.float32)
        opt.zero_grad()
        loss = ce(bundle.age_clf.net(faces), age_idx) + bce(
            bundle.gender_clf(faces).clamp(1e-6, 1 - 1e-6), gen_val
        )
        loss.backward()
        opt.step()
        if step % 100 == 0 or step == config.classifier_steps:
            age_acc, gen_acc = classifier_accuracy(bundle, val_pool)
            history.append({"step": step, "age_acc": age_acc, "gender_acc": gen_acc})
            if log:
                log(f"classifiers step {step}: age {age_acc:.3f} gender {gen_acc:.3f}")
            if age_acc >= 0.97 and gen_acc >= 0.97 and step >= 200:
                break
    bundle.freeze_auxiliaries()
    return {"history": history}


# ---------------------------------------------------------------------------
# Attribute-module pretraining
# ---------------------------------------------------------------------------


def pretrain_attribute_module(
    config: TrainConfig,
    bundle: ModelBundle,
    train_pool: FacePool,
    log=None,
    label_guidance: bool = True,
) -> dict:
    """Train the attribute encoder-decoder on real faces.

    Reconstruction under each face's own labels (pixel + adversarial +
    perceptual), plus, when label_guidance is on, a pass that decodes under
    random labels and scores it with the frozen age/gender classifiers so the
    label pathway actually drives the rendering.
    """
    w = effective_weights(config)
    rng = np.random.default_rng(config.seed + 202)
    opt_g = torch.optim.Adam(
        bundle.attribute.parameters(), lr=config.learning_rate, betas=config.adam_betas
    )
    opt_d = torch.optim.Adam(
        bundle.att_disc.parameters(), lr=config.learning_rate, betas=config.adam_betas
    )
    use_ag = "AG" in config.ablation and label_guidance
    last = {}
    for step in range(1, config.attr_pretrain_steps + 1):
        batch = _sample_subjects(train_pool, rng, config.batch_size)
        faces = NW.to_tensor(np.stack([s.face for s in batch]))
        own_labels = [s.label for s in batch]

        recon = NW.attribute_forward(faces, own_labels, bundle.attribute)

        opt_d.zero_grad()
        d_loss, _ = LS.attribute_adversarial_losses(bundle.att_disc, faces, recon)
        d_loss.backward()
        opt_d.step()

        opt_g.zero_grad()
        _, g_adv = LS.attribute_adversarial_losses(bundle.att_disc, faces, recon)
        pix = LS.pixel_loss(recon, faces)
        per = LS.perceptual_loss(recon, faces, bundle.perceptual)
        loss = LS.total_attribute_loss(pix, g_adv, per, w)
        if use_ag:
            rand_labels = [
                AttributeLabel(
                    str(rng.choice(AGE_STAGES)), str(rng.choice(GENDERS))
                )
                for _ in batch
            ]
            swapped = NW.attribute_forward(faces, rand_labels, bundle.attribute)
            age_t, gen_t = _label_targets(rand_labels)
            loss = (
                loss
                + LS.age_loss(bundle.age_clf(swapped), age_t)
                + LS.gender_loss(bundle.gender_clf(swapped), gen_t)
                + w.attribute_perceptual
                * LS.perceptual_loss(swapped, faces, bundle.perceptual)
            )
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"attribute pretraining diverged at step {step}")
        loss.backward()
        opt_g.step()
        last = {"step": step, "pix": float(pix), "loss": float(loss)}
        if log and step % 200 == 0:
            log(f"attribute pretrain step {step}: pix {float(pix):.4f}")
    return last


# ---------------------------------------------------------------------------
# Joint training
# ---------------------------------------------------------------------------


def _synthesize_inputs(pairs, layout):
    """Run the component exchange for a batch of pairs (numpy side)."""
    syn_m, syn_f = [], []
    for p in pairs:
        a, b = exchange_components(p.face_m, p.face_f, layout, p.v)
        syn_m.append(a)
        syn_f.append(b)
    return np.stack(syn_m), np.stack(syn_f)


def _bits_tensor(pairs) -> torch.Tensor:
    return torch.tensor([list(p.v.bits) for p in pairs], dtype=torch.float32)


def _generator_forward(bundle, config, syn_m, syn_f, pairs, torch_gen):
    """Batched inheritance pass with per-pair control vectors."""
    lat_m = NW.encode_components(syn_m, bundle.layout, bundle.inheritance)
    lat_f = NW.encode_components(syn_f, bundle.layout, bundle.inheritance)
    comb_m, comb_f = NW.exchange_latents_batch(lat_m, lat_f, _bits_tensor(pairs))
    hh = config.canvas_size // config.stride
    batch = syn_m.shape[0]
    noise_m = torch.randn(batch, config.noise_channels, hh, hh, generator=torch_gen)
    noise_f = torch.randn(batch, config.noise_channels, hh, hh, generator=torch_gen)
    out_m = bundle.inheritance.decoder(
        NW.integrate_features(comb_m, bundle.layout, [p.label_m for p in pairs], noise_m, config.stride)
    )
    out_f = bundle.inheritance.decoder(
        NW.integrate_features(comb_f, bundle.layout, [p.label_f for p in pairs], noise_f, config.stride)
    )
    return out_m, out_f


@dataclass
class TrainState:
    iteration: int
    bundle: ModelBundle
    opt_gen: torch.optim.Optimizer
    opt_critic: torch.optim.Optimizer
    opt_att: torch.optim.Optimizer
    opt_att_disc: torch.optim.Optimizer
    pair_rng: np.random.Generator
    torch_gen: torch.Generator
    last_att: dict

    def payload(self) -> dict:
        return {
            "iteration": self.iteration,
            "weights": self.bundle.weights_payload(),
            "optim": {
                "gen": self.opt_gen.state_dict(),
                "critic": self.opt_critic.state_dict(),
                "att": self.opt_att.state_dict(),
                "att_disc": self.opt_att_disc.state_dict(),
            },
            "pair_rng_json": json.dumps(self.pair_rng.bit_generator.state),
            "torch_gen_state": self.torch_gen.get_state(),
            "last_att_json": json.dumps(self.last_att),
        }

    def restore(self, payload: dict, config_block: dict):
        self.iteration = int(payload["iteration"])
        self.bundle.load_weights(payload["weights"], config_block)
        self.opt_gen.load_state_dict(payload["optim"]["gen"])
        self.opt_critic.load_state_dict(payload["optim"]["critic"])
        self.opt_att.load_state_dict(payload["optim"]["att"])
        self.opt_att_disc.load_state_dict(payload["optim"]["att_disc"])
        self.pair_rng.bit_generator.state = json.loads(payload["pair_rng_json"])
        self.torch_gen.set_state(payload["torch_gen_state"])
        self.last_att = json.loads(payload["last_att_json"])


def _make_state(config: TrainConfig, bundle: ModelBundle) -> TrainState:
    mk = lambda params: torch.optim.Adam(
        params, lr=config.learning_rate, betas=config.adam_betas
    )
    return TrainState(
        iteration=0,
        bundle=bundle,
        opt_gen=mk(bundle.inheritance.parameters()),
        opt_critic=mk(bundle.critic.parameters()),
        opt_att=mk(bundle.attribute.parameters()),
        opt_att_disc=mk(bundle.att_disc.parameters()),
        pair_rng=np.random.default_rng(config.seed + 303),
        torch_gen=torch.Generator().manual_seed(config.seed + 404),
        last_att={"pix": 0.0, "adv": 0.0, "per": 0.0, "total": 0.0},
    )


def _dump_divergence(run_dir: Path, iteration: int, pairs, syn_m, syn_f):
    dump = run_dir / f"nan-dump-{iteration}.ckpt"
    payload = {
        "iteration": iteration,
        "syn_m": torch.from_numpy(syn_m),
        "syn_f": torch.from_numpy(syn_f),
        "vectors": [p.v.text for p in pairs],
    }
    torch.save(payload, dump)
    return dump


def train_joint(
    config: TrainConfig,
    bundle: ModelBundle,
    train_pool: FacePool,
    resume_from: str | Path | None = None,
    log=None,
) -> dict:
    """The joint loop. Returns {"run_dir", "metrics_path", "checkpoints"}.

    Expects pretrained classifiers (frozen) and attribute weights already in
    the bundle unless training from scratch is intended.
    """
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    w = effective_weights(config)
    use_ag = "AG" in config.ablation
    use_ad = "AD" in config.ablation
    bundle.freeze_auxiliaries()
    state = _make_state(config, bundle)

    mode = "w"
    if resume_from is not None:
        cfg_block, payload = load_checkpoint(resume_from)
        state.restore(payload, cfg_block)
        mode = "a"
    clf_hash_before = parameter_hash(bundle.age_clf) + parameter_hash(bundle.gender_clf)

    metrics_path = run_dir / "metrics.jsonl"
    checkpoints = []
    with open(metrics_path, mode) as metrics:
        for iteration in range(state.iteration + 1, config.iterations + 1):
            state.iteration = iteration
            pairs = _sample_pairs(train_pool, state.pair_rng, config.batch_size)
            syn_m, syn_f = _synthesize_inputs(pairs, bundle.layout)
            syn_m_t, syn_f_t = NW.to_tensor(syn_m), NW.to_tensor(syn_f)
            real_m = NW.to_tensor(np.stack([p.face_m for p in pairs]))
            real_f = NW.to_tensor(np.stack([p.face_f for p in pairs]))
            real_all = torch.cat([real_m, real_f])

            record = {"iter": iteration}

            # Critic updates (skipped entirely when the adversarial loss is
            # ablated away; with u sampled per step the metrics stay aligned).
            if use_ad and w.inheritance_adversarial > 0 and config.critic_steps > 0:
                with torch.no_grad():
                    fake_m, fake_f = _generator_forward(
                        bundle, config, syn_m_t, syn_f_t, pairs, state.torch_gen
                    )
                    fake_all = torch.cat([fake_m, fake_f])
                for _ in range(config.critic_steps):
                    state.opt_critic.zero_grad()
                    critic_loss, _ = LS.wgan_losses(
                        bundle.critic, real_all, fake_all, w.gradient_penalty, state.torch_gen
                    )
                    critic_loss.backward()
                    state.opt_critic.step()
                record["critic"] = float(critic_loss)
            else:
                record["critic"] = 0.0

            # Generator (inheritance) update.
            state.opt_gen.zero_grad()
            out_m, out_f = _generator_forward(
                bundle, config, syn_m_t, syn_f_t, pairs, state.torch_gen
            )
            out_all = torch.cat([out_m, out_f])
            pix = LS.pixel_loss(out_m, real_m) + LS.pixel_loss(out_f, real_f)
            if use_ag:
                age_tm, gen_tm = _label_targets([p.label_m for p in pairs])
                age_tf, gen_tf = _label_targets([p.label_f for p in pairs])
                age = LS.age_loss(bundle.age_clf(out_m), age_tm) + LS.age_loss(
                    bundle.age_clf(out_f), age_tf
                )
                gen = LS.gender_loss(bundle.gender_clf(out_m), gen_tm) + LS.gender_loss(
                    bundle.gender_clf(out_f), gen_tf
                )
            else:
                age = torch.tensor(0.0)
                gen = torch.tensor(0.0)
            if use_ad and w.inheritance_adversarial > 0:
                adv = -LS.critic_scalar(bundle.critic, out_all).mean()
            else:
                adv = torch.tensor(0.0)
            per = LS.perceptual_loss(out_m, real_m, bundle.perceptual) + LS.perceptual_loss(
                out_f, real_f, bundle.perceptual
            )
            l_inh = LS.total_inheritance_loss(age, gen, pix, adv, per, w)
            if not torch.isfinite(l_inh):
                dump = _dump_divergence(run_dir, iteration, pairs, syn_m, syn_f)
                raise TrainingDiverged(
                    f"non-finite inheritance loss at iteration {iteration}; batch dumped to {dump}"
                )
            l_inh.backward()
            state.opt_gen.step()

            record.update(
                pix=float(pix),
                age=float(age),
                gender=float(gen),
                adv=float(adv),
                per=float(per),
                L_inh=float(l_inh),
            )

            # Attribute-module update on schedule.
            att_updated = iteration % config.attr_update_period == 0
            if att_updated:
                inter = out_all.detach()
                labels = [p.label_m for p in pairs] + [p.label_f for p in pairs]
                recon = NW.attribute_forward(inter, labels, bundle.attribute)

                state.opt_att_disc.zero_grad()
                d_loss, _ = LS.attribute_adversarial_losses(bundle.att_disc, real_all, recon)
                d_loss.backward()
                state.opt_att_disc.step()

                state.opt_att.zero_grad()
                _, g_adv = LS.attribute_adversarial_losses(bundle.att_disc, real_all, recon)
                att_pix = LS.pixel_loss(recon, inter)
                att_per = LS.perceptual_loss(recon, inter, bundle.perceptual)
                l_att = LS.total_attribute_loss(att_pix, g_adv, att_per, w)
                if not torch.isfinite(l_att):
                    dump = _dump_divergence(run_dir, iteration, pairs, syn_m, syn_f)
                    raise TrainingDiverged(
                        f"non-finite attribute loss at iteration {iteration}; dumped to {dump}"
                    )
                l_att.backward()
                state.opt_att.step()
                state.last_att = {
                    "pix": float(att_pix),
                    "adv": float(g_adv),
                    "per": float(att_per),
                    "total": float(l_att),
                }

            record["att_updated"] = att_updated
            record["L_att"] = state.last_att["total"]
            record["L"] = float(LS.total_loss(record["L_inh"], record["L_att"], w))
            metrics.write(json.dumps(record) + "\n")

            if log and iteration % 100 == 0:
                log(
                    f"iter {iteration}: pix {record['pix']:.4f} "
                    f"L_inh {record['L_inh']:.4f} L {record['L']:.4f}"
                )

            if iteration % config.checkpoint_interval == 0 or iteration == config.iterations:
                ckpt = run_dir / f"ckpt-{iteration}"
                save_checkpoint(state.payload(), config.model_config(), ckpt)
                checkpoints.append(ckpt)

    clf_hash_after = parameter_hash(bundle.age_clf) + parameter_hash(bundle.gender_clf)
    if clf_hash_before != clf_hash_after:
        raise TrainError("classifier weights changed during joint training")

    return {
        "run_dir": run_dir,
        "metrics_path": metrics_path,
        "checkpoints": checkpoints,
    }


def run_training(
    config: TrainConfig, resume_from: str | Path | None = None, log=print
) -> dict:
    """Full pipeline: pools, classifier pretrain, attribute pretrain, joint."""
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    train_pool, test_pool = load_pools(config)
    bundle = ModelBundle.build(config)
    if resume_from is None:
        if log:
            log(f"training classifiers on {len(train_pool.subjects)} subjects")
        pretrain_classifiers(config, bundle, train_pool, test_pool, log=log)
        save_checkpoint(
            {"weights": bundle.weights_payload(), "iteration": 0},
            config.model_config(),
            run_dir / "pretrain-classifiers",
        )
        if log:
            log("pretraining attribute module")
        pretrain_attribute_module(config, bundle, train_pool, log=log)
        save_checkpoint(
            {"weights": bundle.weights_payload(), "iteration": 0},
            config.model_config(),
            run_dir / "pretrain-attribute",
        )
    result = train_joint(config, bundle, train_pool, resume_from=resume_from, log=log)
    result["bundle"] = bundle
    result["train_pool"] = train_pool
    result["test_pool"] = test_pool
    return result


def main_log(message: str):
    print(message, file=sys.stderr, flush=True)
