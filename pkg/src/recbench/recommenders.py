"""Five recommenders behind one fit/predict contract.

cooc and svd are linear-algebra baselines; mlp, ae, and aae train with
the hand-rolled neural stack. Fits are deterministic under their seed,
fitted models are immutable in practice, and predict is side-effect-free.
Scores are dense (n_test x n_items) float64 arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .linalg import SparseBinaryMatrix, SvdFactors, check_dense_capacity, gram, spmm, truncated_svd
from .neural import (
    AdamState,
    DenseLayer,
    Mlp2,
    adam_step,
    backward,
    bce,
    forward,
    init_mlp2,
    mlp_params,
    sample_gaussian,
)
from .textfeat import TitleFeatures

HIDDEN_DIM = 100
CODE_DIM = 50
DROPOUT_P = 0.2
BATCH_SIZE = 100
LEARNING_RATE = 0.001
DEFAULT_EPOCHS = 20
SVD_MAX_RANK = 1000


@dataclass(frozen=True)
class PredictInput:
    """Corrupted test rows plus optional title features (rows aligned)."""

    x_corrupted: SparseBinaryMatrix
    titles: TitleFeatures | None = None


# ---------------------------------------------------------------------------
# item co-occurrence


@dataclass(frozen=True)
class CoocModel:
    cooccurrence: np.ndarray  # n x n, diagonal keeps per-item counts

    @property
    def n_items(self) -> int:
        return self.cooccurrence.shape[0]


def cooc_fit(x_train: SparseBinaryMatrix) -> CoocModel:
    return CoocModel(cooccurrence=gram(x_train))


def cooc_predict(model: CoocModel, pin: PredictInput) -> np.ndarray:
    """Aggregate co-occurrence counts of each candidate with the known items.

    The diagonal term keeps item priors in the scores; titles are ignored.
    """
    if pin.x_corrupted.n_cols != model.n_items:
        raise ValueError(
            f"column count {pin.x_corrupted.n_cols} does not match "
            f"the fitted item space {model.n_items}"
        )
    return spmm(pin.x_corrupted, model.cooccurrence)


# ---------------------------------------------------------------------------
# truncated SVD


@dataclass(frozen=True)
class SvdModel:
    factors: SvdFactors
    n_items: int
    k: int
    title_dim: int  # 0 for the unimodal variant

    @property
    def uses_titles(self) -> bool:
        return self.title_dim > 0


def svd_fit(x_train: SparseBinaryMatrix, titles_train: TitleFeatures | None = None,
            k: int | None = None, seed: int = 0) -> SvdModel:
    """Factorize the train matrix, optionally with TF-IDF columns appended.

    k defaults to min(SVD_MAX_RANK, matrix dimensions). The input is
    densified, so the capacity cutoff applies.
    """
    title_dim = 0
    if titles_train is not None:
        if titles_train.n_rows != x_train.n_rows:
            raise ValueError("title feature rows do not match the train matrix")
        title_dim = titles_train.tfidf_sparse.shape[1]
    n_total = x_train.n_cols + title_dim
    check_dense_capacity(x_train.n_rows, n_total, "SVD input")
    if k is None:
        k = min(SVD_MAX_RANK, x_train.n_rows, n_total)
    dense = x_train.to_dense()
    if title_dim:
        dense = np.hstack([dense, titles_train.tfidf_sparse.toarray()])
    factors = truncated_svd(dense, k=k, seed=seed)
    return SvdModel(factors=factors, n_items=x_train.n_cols, k=k, title_dim=title_dim)


def svd_truncate(model: SvdModel, k: int) -> SvdModel:
    """Restrict a fitted factorization to its top-k components.

    Factor once at the largest rank of interest, then truncate for cheaper
    rank sweeps; prefixes of one factorization keep the subspaces nested.
    """
    if not 1 <= k <= model.k:
        raise ValueError(f"k={k} out of range for a rank-{model.k} model")
    f = model.factors
    return SvdModel(
        factors=SvdFactors(u=f.u[:, :k], sigma=f.sigma[:k], vt=f.vt[:k]),
        n_items=model.n_items, k=k, title_dim=model.title_dim,
    )


def svd_predict(model: SvdModel, pin: PredictInput) -> np.ndarray:
    """Project test rows onto the top-k right singular subspace and
    reconstruct, returning only the item columns."""
    if pin.x_corrupted.n_cols != model.n_items:
        raise ValueError(
            f"column count {pin.x_corrupted.n_cols} does not match "
            f"the fitted item space {model.n_items}"
        )
    rows = pin.x_corrupted.to_dense()
    if model.uses_titles:
        if pin.titles is None:
            raise ValueError("this SVD model was fitted with titles; test titles are required")
        if pin.titles.tfidf_sparse.shape[1] != model.title_dim:
            raise ValueError(
                f"test title width {pin.titles.tfidf_sparse.shape[1]} does not match "
                f"the fitted width {model.title_dim}"
            )
        rows = np.hstack([rows, pin.titles.tfidf_sparse.toarray()])
    vt = model.factors.vt
    return ((rows @ vt.T) @ vt)[:, :model.n_items]


# ---------------------------------------------------------------------------
# title-only MLP


@dataclass(frozen=True)
class MlpModel:
    net: Mlp2
    n_items: int
    title_dim: int


def mlp_fit(titles_train: TitleFeatures, x_train: SparseBinaryMatrix,
            epochs: int = DEFAULT_EPOCHS, seed: int = 0,
            hidden_dim: int = HIDDEN_DIM, dropout_p: float = DROPOUT_P,
            batch_size: int = BATCH_SIZE, lr: float = LEARNING_RATE,
            on_epoch=None) -> MlpModel:
    """Train embedded-title -> item-probability regression under BCE."""
    if titles_train is None:
        raise ValueError("the title MLP requires title features")
    s = np.asarray(titles_train.embedded, dtype=np.float64)
    if s.shape[0] != x_train.n_rows:
        raise ValueError("title feature rows do not match the train matrix")
    rng = np.random.default_rng(seed)
    net = init_mlp2(s.shape[1], hidden_dim, x_train.n_cols, "sigmoid", dropout_p, rng)
    params = mlp_params(net)
    opt = AdamState.for_params(params, lr=lr)
    for epoch in range(epochs):
        perm = rng.permutation(x_train.n_rows)
        for start in range(0, perm.size, batch_size):
            idx = perm[start:start + batch_size]
            x = x_train.gather_rows(idx)
            pred, cache = forward(net, s[idx], mode="train", rng=rng)
            loss, grad = bce(pred, x)
            if not np.isfinite(loss):
                raise DivergenceError("title MLP training")
            grads, _ = backward(net, cache, grad)
            adam_step(opt, params, grads)
        if on_epoch is not None:
            on_epoch(epoch, net)
    return MlpModel(net=net, n_items=x_train.n_cols, title_dim=s.shape[1])


def mlp_predict(model: MlpModel, pin: PredictInput) -> np.ndarray:
    """Score items from the titles alone; the corrupted rows are ignored."""
    if pin.titles is None:
        raise ValueError("the title MLP requires test title features")
    s = np.asarray(pin.titles.embedded, dtype=np.float64)
    if s.shape[1] != model.title_dim:
        raise ValueError(
            f"test title width {s.shape[1]} does not match the fitted width {model.title_dim}"
        )
    scores, _ = forward(model.net, s, mode="eval")
    return scores


# ---------------------------------------------------------------------------
# autoencoders


@dataclass(frozen=True)
class AeModel:
    encoder: Mlp2
    decoder: Mlp2
    code_dim: int
    title_dim: int  # 0 for the unimodal variant


@dataclass(frozen=True)
class AaeModel:
    encoder: Mlp2
    decoder: Mlp2
    discriminator: Mlp2
    code_dim: int
    title_dim: int


def _fit_autoencoder(x_train: SparseBinaryMatrix, titles_train: TitleFeatures | None,
                     epochs: int, seed: int, adversarial: bool,
                     code_dim: int, hidden_dim: int, dropout_p: float,
                     batch_size: int, lr: float, on_epoch=None):
    """Shared trainer for the plain and the adversarial autoencoder.

    Phase 1 (always): encoder+decoder reconstruction step under BCE, with
    title features concatenated to the code before decoding. When
    adversarial, phase 2 trains the discriminator on prior samples vs
    codes and phase 3 trains the encoder to fool it, on the same batch.

    Randomness is split into two streams: the model stream drives
    initialization, shuffling, and phase-1 dropout; the adversarial stream
    drives everything the adversarial phases need (discriminator init,
    prior samples, phase-2/3 dropout). Disabling the adversarial phases
    therefore consumes exactly the draws a plain autoencoder would.
    """
    titles = None
    title_dim = 0
    if titles_train is not None:
        titles = np.asarray(titles_train.embedded, dtype=np.float64)
        if titles.shape[0] != x_train.n_rows:
            raise ValueError("title feature rows do not match the train matrix")
        title_dim = titles.shape[1]

    rng_model = np.random.default_rng(seed)
    rng_adv = np.random.default_rng([seed, 1])
    n = x_train.n_cols
    encoder = init_mlp2(n, hidden_dim, code_dim, "linear", dropout_p, rng_model)
    decoder = init_mlp2(code_dim + title_dim, hidden_dim, n, "sigmoid", dropout_p, rng_model)
    discriminator = None
    opt_disc = opt_gen = None
    enc_params = mlp_params(encoder)
    dec_params = mlp_params(decoder)
    ae_params = enc_params + dec_params
    opt_ae = AdamState.for_params(ae_params, lr=lr)
    if adversarial:
        discriminator = init_mlp2(code_dim, hidden_dim, 1, "sigmoid", dropout_p, rng_adv)
        disc_params = mlp_params(discriminator)
        opt_disc = AdamState.for_params(disc_params, lr=lr)
        opt_gen = AdamState.for_params(enc_params, lr=lr)

    for epoch in range(epochs):
        perm = rng_model.permutation(x_train.n_rows)
        for start in range(0, perm.size, batch_size):
            idx = perm[start:start + batch_size]
            x = x_train.gather_rows(idx)
            bsz = x.shape[0]

            # phase 1: reconstruction
            code, enc_cache = forward(encoder, x, mode="train", rng=rng_model)
            dec_in = np.hstack([code, titles[idx]]) if titles is not None else code
            recon, dec_cache = forward(decoder, dec_in, mode="train", rng=rng_model)
            loss, grad = bce(recon, x)
            if not np.isfinite(loss):
                raise DivergenceError("reconstruction phase")
            dec_grads, grad_dec_in = backward(decoder, dec_cache, grad)
            enc_grads, _ = backward(encoder, enc_cache, grad_dec_in[:, :code_dim])
            adam_step(opt_ae, ae_params, enc_grads + dec_grads)

            if not adversarial:
                continue

            # phase 2: discriminator on prior samples vs current codes
            ones = np.ones((bsz, 1))
            zeros = np.zeros((bsz, 1))
            z = sample_gaussian(bsz, code_dim, rng_adv)
            d_real, cache_real = forward(discriminator, z, mode="train", rng=rng_adv)
            loss_real, grad_real = bce(d_real, ones)
            h, _ = forward(encoder, x, mode="train", rng=rng_adv)
            d_fake, cache_fake = forward(discriminator, h, mode="train", rng=rng_adv)
            loss_fake, grad_fake = bce(d_fake, zeros)
            if not np.isfinite(loss_real + loss_fake):
                raise DivergenceError("discriminator phase")
            g_real, _ = backward(discriminator, cache_real, grad_real)
            g_fake, _ = backward(discriminator, cache_fake, grad_fake)
            adam_step(opt_disc, disc_params, [a + b for a, b in zip(g_real, g_fake)])

            # phase 3: encoder update to fool the discriminator
            h, enc_cache = forward(encoder, x, mode="train", rng=rng_adv)
            d_gen, cache_gen = forward(discriminator, h, mode="train", rng=rng_adv)
            loss_gen, grad_gen = bce(d_gen, ones)
            if not np.isfinite(loss_gen):
                raise DivergenceError("generator phase")
            _, grad_code = backward(discriminator, cache_gen, grad_gen)
            gen_grads, _ = backward(encoder, enc_cache, grad_code)
            adam_step(opt_gen, enc_params, gen_grads)
        if on_epoch is not None:
            on_epoch(epoch, encoder, decoder, discriminator)
    return encoder, decoder, discriminator, title_dim


def ae_fit(x_train: SparseBinaryMatrix, titles_train: TitleFeatures | None = None,
           epochs: int = DEFAULT_EPOCHS, seed: int = 0,
           code_dim: int = CODE_DIM, hidden_dim: int = HIDDEN_DIM,
           dropout_p: float = DROPOUT_P, batch_size: int = BATCH_SIZE,
           lr: float = LEARNING_RATE, on_epoch=None) -> AeModel:
    """Train an undercomplete autoencoder on reconstruction BCE."""
    encoder, decoder, _, title_dim = _fit_autoencoder(
        x_train, titles_train, epochs, seed, adversarial=False,
        code_dim=code_dim, hidden_dim=hidden_dim, dropout_p=dropout_p,
        batch_size=batch_size, lr=lr, on_epoch=on_epoch)
    return AeModel(encoder=encoder, decoder=decoder, code_dim=code_dim, title_dim=title_dim)


def aae_fit(x_train: SparseBinaryMatrix, titles_train: TitleFeatures | None = None,
            epochs: int = DEFAULT_EPOCHS, seed: int = 0, adversarial: bool = True,
            code_dim: int = CODE_DIM, hidden_dim: int = HIDDEN_DIM,
            dropout_p: float = DROPOUT_P, batch_size: int = BATCH_SIZE,
            lr: float = LEARNING_RATE, on_epoch=None) -> AaeModel:
    """Train the adversarial autoencoder (three updates per minibatch).

    With adversarial=False the two adversarial phases are skipped and the
    resulting encoder/decoder trajectory is identical to ae_fit under the
    same seed; the discriminator then stays at its initialization.
    """
    encoder, decoder, discriminator, title_dim = _fit_autoencoder(
        x_train, titles_train, epochs, seed, adversarial=adversarial,
        code_dim=code_dim, hidden_dim=hidden_dim, dropout_p=dropout_p,
        batch_size=batch_size, lr=lr, on_epoch=on_epoch)
    if discriminator is None:
        discriminator = init_mlp2(code_dim, hidden_dim, 1, "sigmoid", dropout_p,
                                  np.random.default_rng([seed, 1]))
    return AaeModel(encoder=encoder, decoder=decoder, discriminator=discriminator,
                    code_dim=code_dim, title_dim=title_dim)


def _autoencode(encoder: Mlp2, decoder: Mlp2, code_dim: int, title_dim: int,
                pin: PredictInput) -> np.ndarray:
    rows = pin.x_corrupted.to_dense()
    code, _ = forward(encoder, rows, mode="eval")
    if title_dim:
        if pin.titles is None:
            raise ValueError("this model was fitted with titles; test titles are required")
        s = np.asarray(pin.titles.embedded, dtype=np.float64)
        if s.shape[1] != title_dim:
            raise ValueError(
                f"test title width {s.shape[1]} does not match the fitted width {title_dim}"
            )
        code = np.hstack([code, s])
    elif pin.titles is not None:
        raise ValueError("this model was fitted without titles; drop the test titles")
    scores, _ = forward(decoder, code, mode="eval")
    return scores


def ae_predict(model: AeModel, pin: PredictInput) -> np.ndarray:
    """One deterministic encode-decode pass over the corrupted rows."""
    return _autoencode(model.encoder, model.decoder, model.code_dim, model.title_dim, pin)


def aae_predict(model: AaeModel, pin: PredictInput) -> np.ndarray:
    """One deterministic encode-decode pass; the discriminator is unused."""
    return _autoencode(model.encoder, model.decoder, model.code_dim, model.title_dim, pin)


def encode(model, x: SparseBinaryMatrix) -> np.ndarray:
    """Eval-mode codes for a batch of item rows (diagnostics)."""
    code, _ = forward(model.encoder, x.to_dense(), mode="eval")
    return code


# ---------------------------------------------------------------------------
# checkpoints


def _mlp_arrays(prefix: str, mlp: Mlp2) -> dict[str, np.ndarray]:
    out = {}
    for name, layer in zip(("layer1", "layer2", "out_layer"), mlp.layers):
        out[f"{prefix}.{name}.w"] = layer.w
        out[f"{prefix}.{name}.b"] = layer.b
    return out


def _mlp_meta(mlp: Mlp2) -> dict:
    return {
        "activations": [layer.activation for layer in mlp.layers],
        "dropout_ps": [layer.dropout_p for layer in mlp.layers],
    }


def _mlp_from(prefix: str, arrays, meta: dict) -> Mlp2:
    layers = []
    for i, name in enumerate(("layer1", "layer2", "out_layer")):
        layers.append(DenseLayer(
            w=np.array(arrays[f"{prefix}.{name}.w"]),
            b=np.array(arrays[f"{prefix}.{name}.b"]),
            activation=meta["activations"][i],
            dropout_p=meta["dropout_ps"][i],
        ))
    return Mlp2(*layers)


def save_model(model, path) -> None:
    """Write a self-describing checkpoint (named tensors + JSON config).

    Tensors round-trip bit-exactly through numpy's npz container.
    """
    arrays: dict[str, np.ndarray]
    if isinstance(model, CoocModel):
        meta = {"kind": "cooc", "n_items": model.n_items}
        arrays = {"cooccurrence": model.cooccurrence}
    elif isinstance(model, SvdModel):
        meta = {"kind": "svd", "n_items": model.n_items, "k": model.k,
                "title_dim": model.title_dim}
        arrays = {"u": model.factors.u, "sigma": model.factors.sigma, "vt": model.factors.vt}
    elif isinstance(model, MlpModel):
        meta = {"kind": "mlp", "n_items": model.n_items, "title_dim": model.title_dim,
                "net": _mlp_meta(model.net)}
        arrays = _mlp_arrays("net", model.net)
    elif isinstance(model, AeModel):
        meta = {"kind": "ae", "code_dim": model.code_dim, "title_dim": model.title_dim,
                "encoder": _mlp_meta(model.encoder), "decoder": _mlp_meta(model.decoder)}
        arrays = {**_mlp_arrays("encoder", model.encoder),
                  **_mlp_arrays("decoder", model.decoder)}
    elif isinstance(model, AaeModel):
        meta = {"kind": "aae", "code_dim": model.code_dim, "title_dim": model.title_dim,
                "encoder": _mlp_meta(model.encoder), "decoder": _mlp_meta(model.decoder),
                "discriminator": _mlp_meta(model.discriminator)}
        arrays = {**_mlp_arrays("encoder", model.encoder),
                  **_mlp_arrays("decoder", model.decoder),
                  **_mlp_arrays("discriminator", model.discriminator)}
    else:
        raise TypeError(f"cannot checkpoint object of type {type(model).__name__}")
    meta_bytes = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=meta_bytes, **arrays)


def load_model(path):
    """Reconstruct a checkpointed model; the inverse of save_model."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        kind = meta["kind"]
        if kind == "cooc":
            return CoocModel(cooccurrence=np.array(data["cooccurrence"]))
        if kind == "svd":
            factors = SvdFactors(u=np.array(data["u"]), sigma=np.array(data["sigma"]),
                                 vt=np.array(data["vt"]))
            return SvdModel(factors=factors, n_items=meta["n_items"], k=meta["k"],
                            title_dim=meta["title_dim"])
        if kind == "mlp":
            return MlpModel(net=_mlp_from("net", data, meta["net"]),
                            n_items=meta["n_items"], title_dim=meta["title_dim"])
        if kind == "ae":
            return AeModel(encoder=_mlp_from("encoder", data, meta["encoder"]),
                           decoder=_mlp_from("decoder", data, meta["decoder"]),
                           code_dim=meta["code_dim"], title_dim=meta["title_dim"])
        if kind == "aae":
            return AaeModel(encoder=_mlp_from("encoder", data, meta["encoder"]),
                            decoder=_mlp_from("decoder", data, meta["decoder"]),
                            discriminator=_mlp_from("discriminator", data, meta["discriminator"]),
                            code_dim=meta["code_dim"], title_dim=meta["title_dim"])
        raise ValueError(f"unknown checkpoint kind {kind!r}")
