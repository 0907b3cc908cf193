import numpy as np
import pytest

from sceneparse.descriptors import DESCRIPTOR_NAMES, GlobalFeatureSet
from sceneparse import retrieval as rt


def _fs(rng, dims=(6, 5, 4, 8)):
    return GlobalFeatureSet(*(rng.random(d) for d in dims))


def _index(rng, n):
    return rt.DescriptorIndex.build([_fs(rng) for _ in range(n)])


def _oracle_topk(index, query, name, alpha):
    q = index.standardize_query(query)[name]
    dists = np.linalg.norm(index.matrices[name] - q, axis=1)
    ranked = sorted(zip(dists, index.ids))
    return [int(i) for _, i in ranked[:alpha]]


def test_retrieve_matches_full_sort_oracle():
    rng = np.random.default_rng(0)
    index = _index(rng, 5)
    query = _fs(rng)
    rset = rt.retrieve(query, index, rt.RetrievalConfig(alpha=2))
    assert rset.cardinality == 8
    for name in DESCRIPTOR_NAMES:
        assert list(rset.by_descriptor[name]) == _oracle_topk(index, query, name, 2)


def test_query_equal_to_training_image_tops_all_lists():
    rng = np.random.default_rng(1)
    sets = [_fs(rng) for _ in range(6)]
    index = rt.DescriptorIndex.build(sets)
    rset = rt.retrieve(sets[3], index, rt.RetrievalConfig(alpha=1))
    for name in DESCRIPTOR_NAMES:
        assert rset.by_descriptor[name][0] == 3
    assert rset.provenance(3) == set(DESCRIPTOR_NAMES)


def test_alpha_equals_pool_gives_every_id_four_times():
    rng = np.random.default_rng(2)
    index = _index(rng, 4)
    rset = rt.retrieve(_fs(rng), index, rt.RetrievalConfig(alpha=4))
    mult = rset.multiplicities(4)
    assert np.array_equal(mult, np.full(4, 4))


def test_alpha_exceeding_pool_rejected():
    rng = np.random.default_rng(3)
    index = _index(rng, 3)
    with pytest.raises(ValueError):
        rt.retrieve(_fs(rng), index, rt.RetrievalConfig(alpha=4))


def test_permutation_invariance():
    rng = np.random.default_rng(4)
    sets = [_fs(rng) for _ in range(7)]
    query = _fs(rng)
    index = rt.DescriptorIndex.build(sets)
    base = rt.retrieve(query, index, rt.RetrievalConfig(alpha=3))

    perm = rng.permutation(7)
    matrices = {n: index.raw[n][perm] for n in DESCRIPTOR_NAMES}
    shuffled = rt.DescriptorIndex(matrices, ids=np.array([int(i) for i in perm]))
    got = rt.retrieve(query, shuffled, rt.RetrievalConfig(alpha=3))
    for name in DESCRIPTOR_NAMES:
        assert sorted(got.by_descriptor[name]) == sorted(base.by_descriptor[name])


def test_scaling_one_descriptor_leaves_its_ranking():
    rng = np.random.default_rng(5)
    sets = [_fs(rng) for _ in range(6)]
    query = _fs(rng)
    index = rt.DescriptorIndex.build(sets)
    base = rt.retrieve(query, index, rt.RetrievalConfig(alpha=2))

    scaled_sets = [
        GlobalFeatureSet(fs.tiny * 3.0, fs.rgb_hist, fs.gist, fs.pyramid) for fs in sets
    ]
    scaled_query = GlobalFeatureSet(query.tiny * 3.0, query.rgb_hist, query.gist, query.pyramid)
    index2 = rt.DescriptorIndex.build(scaled_sets)
    got = rt.retrieve(scaled_query, index2, rt.RetrievalConfig(alpha=2))
    assert np.array_equal(got.by_descriptor["tiny"], base.by_descriptor["tiny"])


class TestRareRetrieval:
    def test_pool_exhaustion(self):
        rng = np.random.default_rng(6)
        index = _index(rng, 5)
        presence = np.zeros((5, 3), dtype=bool)
        presence[[0, 2, 4], 1] = True  # class 2 in exactly 3 images
        out = rt.retrieve_rare(
            _fs(rng), index, presence, np.array([2]), rt.RetrievalConfig(alpha=4)
        )
        rset = out[2]
        assert rset.cardinality == 12  # 3 ids x 4 descriptors
        assert set(rset.image_ids) == {0, 2, 4}

    def test_absent_class_warns_not_fails(self):
        rng = np.random.default_rng(7)
        index = _index(rng, 4)
        presence = np.zeros((4, 2), dtype=bool)
        presence[:, 0] = True
        with pytest.warns(UserWarning, match="class 2"):
            out = rt.retrieve_rare(
                _fs(rng), index, presence, np.array([2]), rt.RetrievalConfig(alpha=2)
            )
        assert out[2].cardinality == 0

    def test_matches_filter_then_sort_oracle(self):
        rng = np.random.default_rng(8)
        sets = [_fs(rng) for _ in range(8)]
        query = _fs(rng)
        index = rt.DescriptorIndex.build(sets)
        presence = rng.random((8, 4)) < 0.5
        presence[1, 2] = True  # guarantee nonempty pool for class 3
        out = rt.retrieve_rare(
            query, index, presence, np.array([3]), rt.RetrievalConfig(alpha=2, rare_alpha=2)
        )
        sub = index.restrict(presence[:, 2])
        want = rt.retrieve(query, sub, rt.RetrievalConfig(alpha=min(2, sub.size)))
        assert np.array_equal(out[3].image_ids, want.image_ids)
