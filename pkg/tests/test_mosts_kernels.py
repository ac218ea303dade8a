import numpy as np
import pytest

from groundsight.errors import GroupDivisibility, ShapeMismatch
from groundsight.mosts.kernels import (
    BatchNorm,
    ChannelAttention,
    ConvSpec,
    GroupBranch,
    bilinear_upsample,
    channel_attention,
    conv_forward,
    cosine_similarity_map,
    global_avg_pool,
    global_max_pool,
    local_grouping,
    sigmoid,
    similarity_mask,
)
from oracles import (
    naive_attention,
    naive_avg_pool,
    naive_bn,
    naive_conv,
    naive_cosine,
    naive_max_pool,
    naive_upsample,
)

TOL = 1e-12


def rand_bn(rng, c):
    return BatchNorm(rng.uniform(0.5, 2, c), rng.normal(size=c), rng.normal(size=c), rng.uniform(0.5, 2, c))


@pytest.mark.parametrize("trial", range(10))
@pytest.mark.parametrize("stride", [1, 2])
def test_standard_conv(rng, trial, stride):
    cin, cout, h, w = rng.integers(1, 5, 2).tolist() + rng.integers(1, 8, 2).tolist()
    x = rng.normal(size=(cin, h, w))
    wt = rng.normal(size=(cout, cin, 3, 3))
    b = rng.normal(size=cout)
    got = conv_forward(x, ConvSpec("standard", wt, b, stride))
    np.testing.assert_allclose(got, naive_conv(x, wt, b, stride), rtol=0, atol=TOL)


@pytest.mark.parametrize("trial", range(10))
def test_depthwise_conv(rng, trial):
    c, h, w = rng.integers(1, 6, 3)
    x = rng.normal(size=(c, h, w))
    wt = rng.normal(size=(c, 1, 3, 3))
    got = conv_forward(x, ConvSpec("depthwise", wt))
    np.testing.assert_allclose(got, naive_conv(x, wt, depthwise=True), rtol=0, atol=TOL)


@pytest.mark.parametrize("trial", range(10))
def test_pointwise_conv_bn_relu(rng, trial):
    cin, cout, h, w = rng.integers(1, 6, 4)
    x = rng.normal(size=(cin, h, w))
    wt = rng.normal(size=(cout, cin, 1, 1))
    b = rng.normal(size=cout)
    bn = rand_bn(rng, cout)
    got = conv_forward(x, ConvSpec("pointwise", wt, b, bn=bn, relu=True))
    ref = np.maximum(naive_bn(naive_conv(x, wt, b), bn.scale, bn.shift, bn.mean, bn.var), 0)
    np.testing.assert_allclose(got, ref, rtol=0, atol=TOL)


def test_conv_identity_kernel(rng):
    x = rng.normal(size=(2, 5, 5))
    wt = np.zeros((2, 2, 3, 3))
    wt[0, 0, 1, 1] = wt[1, 1, 1, 1] = 1
    np.testing.assert_array_equal(conv_forward(x, ConvSpec("standard", wt)), x)
    np.testing.assert_array_equal(conv_forward(x, ConvSpec("standard", wt, stride=2)), x[:, ::2, ::2])


def test_conv_float32_stays_float32(rng):
    x = rng.normal(size=(2, 4, 4)).astype(np.float32)
    y = conv_forward(x, ConvSpec("standard", rng.normal(size=(3, 2, 3, 3))))
    assert y.dtype == np.float32


def test_conv_spec_validation(rng):
    with pytest.raises(ValueError):
        ConvSpec("dilated", np.zeros((1, 1, 3, 3)))
    with pytest.raises(ShapeMismatch):
        ConvSpec("pointwise", np.zeros((1, 1, 3, 3)))
    with pytest.raises(ShapeMismatch):
        ConvSpec("depthwise", np.zeros((2, 2, 3, 3)))
    with pytest.raises(ShapeMismatch):
        ConvSpec("standard", np.zeros((2, 2, 3, 3)), bias=np.zeros(3))
    with pytest.raises(ShapeMismatch):
        conv_forward(np.zeros((3, 4, 4)), ConvSpec("standard", np.zeros((1, 2, 3, 3))))
    with pytest.raises(ShapeMismatch):
        conv_forward(np.zeros((4, 4)), ConvSpec("standard", np.zeros((1, 2, 3, 3))))


@pytest.mark.parametrize("trial", range(10))
def test_pools(rng, trial):
    x = rng.normal(size=tuple(rng.integers(1, 7, 3)))
    np.testing.assert_allclose(global_avg_pool(x), naive_avg_pool(x), rtol=0, atol=TOL)
    np.testing.assert_array_equal(global_max_pool(x), naive_max_pool(x))


@pytest.mark.parametrize("trial", range(10))
def test_cosine_map(rng, trial):
    c, h, w = rng.integers(1, 7, 3)
    fq = rng.normal(size=(c, h, w))
    r = rng.normal(size=(c, 1, 1))
    s = cosine_similarity_map(r, fq)
    np.testing.assert_allclose(s, naive_cosine(r, fq), rtol=0, atol=TOL)
    assert np.all(np.abs(s) <= 1 + 1e-12)
    np.testing.assert_allclose(similarity_mask(fq, s), fq * s[0], rtol=0, atol=0)


def test_cosine_zero_vectors_and_self(rng):
    fq = rng.normal(size=(4, 3, 3))
    fq[:, 0, 0] = 0
    s = cosine_similarity_map(fq[:, 1:2, 1:2].copy(), fq)
    assert s[0, 0, 0] == 0
    assert abs(s[0, 1, 1] - 1) < 1e-15
    assert np.all(cosine_similarity_map(np.zeros((4, 1, 1)), fq) == 0)
    with pytest.raises(ShapeMismatch):
        cosine_similarity_map(np.zeros((3, 1, 1)), fq)
    with pytest.raises(ShapeMismatch):
        similarity_mask(fq, np.zeros((1, 2, 3)))


def test_sigmoid_stable():
    x = np.array([-1000.0, -1.0, 0.0, 1.0, 1000.0])
    s = sigmoid(x)
    assert np.all(np.isfinite(s))
    np.testing.assert_allclose(s, [0, 1 / (1 + np.e), 0.5, 1 / (1 + np.exp(-1)), 1], atol=1e-15)


@pytest.mark.parametrize("trial", range(10))
def test_channel_attention(rng, trial):
    c = int(rng.integers(2, 9))
    hid = int(rng.integers(1, c + 1))
    x = rng.normal(size=(c, 4, 5))
    att = ChannelAttention(rng.normal(size=(hid, c)), rng.normal(size=(c, hid)))
    np.testing.assert_allclose(channel_attention(x, att), naive_attention(x, att.w1, att.w2), rtol=0, atol=TOL)


def test_attention_validation(rng):
    with pytest.raises(ShapeMismatch):
        ChannelAttention(np.zeros((2, 4)), np.zeros((2, 4)))
    with pytest.raises(ShapeMismatch):
        channel_attention(np.zeros((3, 2, 2)), ChannelAttention(np.zeros((2, 4)), np.zeros((4, 2))))


@pytest.mark.parametrize("groups", [1, 2, 4])
def test_local_grouping(rng, groups):
    c, e = 8, 6
    step = c // groups
    fm, fr = rng.normal(size=(2, c, 5, 4))
    branches = []
    for _ in range(groups):
        bn = rand_bn(rng, e)
        branches.append(GroupBranch(
            ConvSpec("depthwise", rng.normal(size=(2 * step, 1, 3, 3)), rng.normal(size=2 * step)),
            ConvSpec("pointwise", rng.normal(size=(e, 2 * step, 1, 1)), rng.normal(size=e), bn=bn, relu=True),
            ChannelAttention(rng.normal(size=(2, e)), rng.normal(size=(e, 2))),
        ))
    ref = np.zeros((e, 5, 4))
    for i, br in enumerate(branches):
        cat = np.concatenate([fm[i * step:(i + 1) * step], fr[i * step:(i + 1) * step]])
        y = naive_conv(cat, br.dw.weight, br.dw.bias, depthwise=True)
        y = naive_conv(y, br.pw.weight, br.pw.bias)
        y = np.maximum(naive_bn(y, bn_of(br).scale, bn_of(br).shift, bn_of(br).mean, bn_of(br).var), 0)
        ref += naive_attention(y, br.attention.w1, br.attention.w2)
    np.testing.assert_allclose(local_grouping(fm, fr, branches), ref, rtol=0, atol=1e-11)


def bn_of(br):
    return br.pw.bn


def test_local_grouping_errors(rng):
    fm = rng.normal(size=(6, 3, 3))
    with pytest.raises(GroupDivisibility):
        local_grouping(fm, fm, [None] * 4)
    with pytest.raises(ShapeMismatch):
        local_grouping(fm, fm[:4], [None] * 2)


@pytest.mark.parametrize("trial", range(10))
def test_upsample(rng, trial):
    c, h, w = rng.integers(1, 5, 3)
    oh, ow = h + int(rng.integers(0, 9)), w + int(rng.integers(0, 9))
    x = rng.normal(size=(c, h, w))
    np.testing.assert_allclose(bilinear_upsample(x, oh, ow), naive_upsample(x, oh, ow), rtol=0, atol=TOL)


def test_upsample_exact_cases(rng):
    x = rng.normal(size=(2, 3, 4))
    np.testing.assert_array_equal(bilinear_upsample(x, 3, 4), x)
    const = np.full((1, 2, 2), 3.25)
    np.testing.assert_array_equal(bilinear_upsample(const, 7, 5), np.full((1, 7, 5), 3.25))
    with pytest.raises(ShapeMismatch):
        bilinear_upsample(x, 2, 4)
