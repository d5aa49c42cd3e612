# This code is part of gama-adapt.
#
# (C) Copyright The gama-adapt Authors 2026.
#
# This code is licensed under the Apache License, Version 2.0. You may
# obtain a copy of this license in the LICENSE.txt file in the root directory
# of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
#
# Any modifications or derivative works of this code must retain this
# copyright notice, and modified files need to carry a notice indicating
# that they have been altered from the originals.

"""Feed-forward networks with exact reverse-mode gradients.

A network is a ``NetSpec`` (shape) plus ``NetParams`` (values). Layer ``i`` of
``layer_widths`` is the activation after ``i`` affine maps: layer 0 is the
input, the last layer is the logits (no nonlinearity), every layer in between
applies ``activation``. The embedding ``phi(x)`` is the activation at
``embedding_layer``.

Gradients are computed by :func:`backward`, which pulls cotangents on the
logits and, optionally, on the embedding back to every parameter and to the
input. Composite objectives hand a list of :class:`Cotangent` records to
:func:`param_gradients`; each record names the loss term it came from so a
non-finite contribution can be reported precisely.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from .constants import Activation
from .exceptions import GamaNumericError, GamaParameterError

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (64, 32)


@dataclass(frozen=True)
class NetSpec:
    """Shape of a feed-forward classifier with an identified encoder layer.

    Args:
        layer_widths (tuple[int]): input dimension first, class count last.
        activation (Activation): hidden nonlinearity.
        embedding_layer (int or None): layer whose activation is the
            embedding; defaults to the penultimate layer. Nets without hidden
            layers use the input (layer 0).
    """

    layer_widths: Tuple[int, ...]
    activation: Activation = Activation.TANH
    embedding_layer: Optional[int] = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise GamaParameterError(
                'layer_widths needs >= 2 positive entries, got {}'.format(self.layer_widths))
        activation = Activation(self.activation)
        embedding = self.embedding_layer
        if embedding is None:
            embedding = max(len(widths) - 2, 0)
        embedding = int(embedding)
        if len(widths) == 2:
            if embedding != 0:
                raise GamaParameterError('A net without hidden layers embeds at layer 0')
        elif not 0 < embedding < len(widths) - 1:
            raise GamaParameterError(
                'embedding_layer must be a hidden layer in (0, {}), got {}'.format(
                    len(widths) - 1, embedding))
        object.__setattr__(self, 'layer_widths', widths)
        object.__setattr__(self, 'activation', activation)
        object.__setattr__(self, 'embedding_layer', embedding)

    @classmethod
    def default(cls, input_dim, n_classes, hidden=DEFAULT_HIDDEN, activation=Activation.TANH):
        """Return ``[d, *hidden, c]`` embedding at the last hidden layer."""
        return cls(layer_widths=(input_dim, *hidden, n_classes), activation=activation)

    @property
    def n_affine(self):
        """Number of affine maps."""
        return len(self.layer_widths) - 1

    @property
    def input_dim(self):
        """Input dimension d."""
        return self.layer_widths[0]

    @property
    def n_classes(self):
        """Output dimension c."""
        return self.layer_widths[-1]

    @property
    def embedding_dim(self):
        """Width of the embedding layer."""
        return self.layer_widths[self.embedding_layer]

    def to_dict(self):
        """JSON-ready form used by checkpoints and reports."""
        return {'layer_widths': list(self.layer_widths),
                'activation': self.activation.value,
                'embedding_layer': self.embedding_layer}

    @classmethod
    def from_dict(cls, data):
        """Inverse of :meth:`to_dict`."""
        return cls(layer_widths=tuple(data['layer_widths']),
                   activation=Activation(data['activation']),
                   embedding_layer=data['embedding_layer'])


@dataclass(frozen=True)
class NetParams:
    """Weights (out x in) and biases of every affine map."""

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def arrays(self):
        """Return ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays):
        """Inverse of :meth:`arrays`."""
        arrays = [np.array(a, dtype=float) for a in arrays]
        return cls(weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))

    def zeros_like(self):
        """Same shapes, all zeros."""
        return NetParams.from_arrays([np.zeros_like(a) for a in self.arrays()])

    def scaled(self, factor):
        """Return ``factor * self``."""
        return NetParams.from_arrays([factor * a for a in self.arrays()])

    def plus(self, other):
        """Return ``self + other``."""
        return NetParams.from_arrays([a + b for a, b in zip(self.arrays(), other.arrays())])

    def all_finite(self):
        """True when every entry is finite."""
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def check(self, spec):
        """Raise ``GamaParameterError`` unless shapes match ``spec``."""
        if len(self.weights) != spec.n_affine or len(self.biases) != spec.n_affine:
            raise GamaParameterError('Expected {} layers, got {}'.format(
                spec.n_affine, len(self.weights)))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (spec.layer_widths[i + 1], spec.layer_widths[i])
            if w.shape != shape or b.shape != (shape[0],):
                raise GamaParameterError('Layer {} has shapes {}/{}, expected {}/{}'.format(
                    i, w.shape, b.shape, shape, (shape[0],)))


def init_params(spec, seed):
    """Uniform(-s, s) weights with ``s = sqrt(6 / (fan_in + fan_out))``, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        scale = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetParams(weights=tuple(weights), biases=tuple(biases))


def _activate(activation, z):
    if activation is Activation.TANH:
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad(activation, z, h):
    if activation is Activation.TANH:
        return 1.0 - h ** 2
    return (z > 0.0).astype(float)


@dataclass(frozen=True)
class ForwardPass:
    """Batched forward evaluation with the intermediates ``backward`` needs."""

    inputs: np.ndarray
    logits: np.ndarray
    embedding: np.ndarray
    log_probs: np.ndarray
    activations: Tuple[np.ndarray, ...] = field(repr=False)
    preactivations: Tuple[Optional[np.ndarray], ...] = field(repr=False)

    @property
    def probs(self):
        """Softmax of the logits."""
        return np.exp(self.log_probs)


def _as_batch(spec, x):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.ndim != 2 or batch.shape[1] != spec.input_dim:
        raise GamaParameterError('Input of shape {} does not match input dimension {}'.format(
            arr.shape, spec.input_dim))
    return batch, single


def run(spec, params, x):
    """Evaluate the net on a batch ``x`` (n x d) and keep intermediates."""
    batch, _ = _as_batch(spec, x)
    activations = [batch]
    preactivations = [None]
    h = batch
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        if i == spec.n_affine - 1:
            h = z
        else:
            h = _activate(spec.activation, z)
        activations.append(h)
        preactivations.append(z)
    logits = activations[-1]
    return ForwardPass(inputs=batch, logits=logits,
                       embedding=activations[spec.embedding_layer],
                       log_probs=log_softmax(logits, axis=1),
                       activations=tuple(activations), preactivations=tuple(preactivations))


class ForwardResult(NamedTuple):
    """Outputs of :func:`forward`."""

    logits: np.ndarray
    embedding: np.ndarray
    probs: np.ndarray


def forward(spec, params, x):
    """Return logits, embedding and class probabilities for ``x``.

    ``x`` may be a single input vector or an n x d batch; outputs follow the
    same convention.

    Raises:
        GamaParameterError: on an input or parameter shape mismatch.
    """
    params.check(spec)
    batch, single = _as_batch(spec, x)
    fwd = run(spec, params, batch)
    out = ForwardResult(logits=fwd.logits, embedding=fwd.embedding, probs=fwd.probs)
    if single:
        return ForwardResult(*(a[0] for a in out))
    return out


def backward(spec, params, fwd, d_logits, d_embedding=None):
    """Pull cotangents on logits (and embedding) back through ``fwd``.

    Args:
        spec (NetSpec): network shape.
        params (NetParams): the parameters ``fwd`` was computed with.
        fwd (ForwardPass): forward intermediates.
        d_logits (np.ndarray): n x c cotangent of the logits.
        d_embedding (np.ndarray or None): n x e cotangent of the embedding.

    Returns:
        tuple(NetParams, np.ndarray): parameter gradients and the n x d input
            gradient.
    """
    grad_w = [None] * spec.n_affine
    grad_b = [None] * spec.n_affine
    delta = np.asarray(d_logits, dtype=float)
    d_input = None
    for layer in range(spec.n_affine - 1, -1, -1):
        h_prev = fwd.activations[layer]
        grad_w[layer] = delta.T @ h_prev
        grad_b[layer] = delta.sum(axis=0)
        d_h = delta @ params.weights[layer]
        if d_embedding is not None and layer == spec.embedding_layer:
            d_h = d_h + d_embedding
        if layer == 0:
            d_input = d_h
        else:
            delta = d_h * _activation_grad(spec.activation, fwd.preactivations[layer], h_prev)
    return NetParams(weights=tuple(grad_w), biases=tuple(grad_b)), d_input


def _check_labels(spec, y, n):
    labels = np.asarray(y)
    if labels.ndim == 0:
        labels = labels.reshape(1)
    if labels.shape != (n,) or not np.issubdtype(labels.dtype, np.integer):
        raise GamaParameterError('Expected {} integer labels, got {!r}'.format(n, y))
    if np.any(labels < 0) or np.any(labels >= spec.n_classes):
        raise GamaParameterError('Labels must lie in [0, {}), got {}'.format(
            spec.n_classes, np.unique(labels)))
    return labels


def input_gradient(spec, params, x, y):
    """Gradient of the cross-entropy loss with respect to the input.

    For a batch, row ``i`` is the gradient of sample ``i``'s own loss.

    Raises:
        GamaParameterError: if a label is outside ``[0, c)``.
    """
    params.check(spec)
    batch, single = _as_batch(spec, x)
    labels = _check_labels(spec, y, batch.shape[0])
    fwd = run(spec, params, batch)
    d_logits = fwd.probs
    d_logits[np.arange(batch.shape[0]), labels] -= 1.0
    _, d_input = backward(spec, params, fwd, d_logits)
    return d_input[0] if single else d_input


@dataclass(frozen=True)
class Cotangent:
    """One loss term's cotangent on a forward pass."""

    term: str
    forward: ForwardPass
    d_logits: np.ndarray
    d_embedding: Optional[np.ndarray] = None


def param_gradients(spec, params, cotangents):
    """Sum parameter gradients of every contribution, in the given order.

    Args:
        spec (NetSpec): network shape.
        params (NetParams): parameters the forward passes used.
        cotangents (list[Cotangent]): per-term cotangents, already scaled by
            the term weight and the batch mean.

    Returns:
        NetParams: gradient of the combined objective.

    Raises:
        GamaParameterError: if no contribution is given.
        GamaNumericError: naming the term whose gradient is not finite.
    """
    if not cotangents:
        raise GamaParameterError('param_gradients needs at least one contribution')
    total = params.zeros_like()
    for cot in cotangents:
        grads, _ = backward(spec, params, cot.forward, cot.d_logits, cot.d_embedding)
        if not grads.all_finite():
            raise GamaNumericError('Gradient of loss term {!r} is not finite'.format(cot.term),
                                   term=cot.term)
        total = total.plus(grads)
    return total


@dataclass(frozen=True)
class AutoencoderParams:
    """Encoder ``E`` and decoder ``D`` networks; both end in a linear layer."""

    encoder_spec: NetSpec
    encoder: NetParams
    decoder_spec: NetSpec
    decoder: NetParams

    def __post_init__(self):
        if self.decoder_spec.n_classes != self.encoder_spec.input_dim:
            raise GamaParameterError('Decoder output {} must equal encoder input {}'.format(
                self.decoder_spec.n_classes, self.encoder_spec.input_dim))
        if self.decoder_spec.input_dim != self.encoder_spec.n_classes:
            raise GamaParameterError('Decoder input must equal the latent width')
        self.encoder.check(self.encoder_spec)
        self.decoder.check(self.decoder_spec)

    @property
    def latent(self):
        """Latent width."""
        return self.encoder_spec.n_classes


def init_autoencoder(input_dim, latent, hidden, seed, activation=Activation.TANH):
    """Return a seeded ``[d, hidden, latent]`` / ``[latent, hidden, d]`` autoencoder."""
    enc_spec = NetSpec((input_dim, hidden, latent), activation)
    dec_spec = NetSpec((latent, hidden, input_dim), activation)
    return AutoencoderParams(enc_spec, init_params(enc_spec, seed),
                             dec_spec, init_params(dec_spec, seed + 1))


def reconstruct(ae, x):
    """Return ``D(E(x))``."""
    code = forward(ae.encoder_spec, ae.encoder, x).logits
    return forward(ae.decoder_spec, ae.decoder, code).logits


def autoencoder_residual(ae, x):
    """Return ``x - D(E(x))``, the off-manifold direction estimate.

    Raises:
        GamaParameterError: if ``x`` does not match the encoder input.
    """
    arr = np.asarray(x, dtype=float)
    return arr - reconstruct(ae, arr)


def reconstruction_gradients(ae, x):
    """Mean ``0.5 |D(E(x)) - x|^2`` and its gradients for encoder and decoder.

    Returns:
        tuple(float, NetParams, NetParams): loss, encoder and decoder gradients.
    """
    batch, _ = _as_batch(ae.encoder_spec, x)
    n = batch.shape[0]
    enc = run(ae.encoder_spec, ae.encoder, batch)
    dec = run(ae.decoder_spec, ae.decoder, enc.logits)
    diff = dec.logits - batch
    loss = 0.5 * float(np.sum(diff ** 2)) / n
    dec_grads, d_code = backward(ae.decoder_spec, ae.decoder, dec, diff / n)
    enc_grads, _ = backward(ae.encoder_spec, ae.encoder, enc, d_code)
    return loss, enc_grads, dec_grads
