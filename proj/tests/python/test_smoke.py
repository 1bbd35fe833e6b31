import numpy as np
import pytest

import quickadc as qa


@pytest.fixture(scope="module")
def data():
    return qa.generate_synthetic(dim=32, base=3000, learn=4000, queries=30, seed=3)


def test_vecs_round_trip(tmp_path):
    x = np.arange(12, dtype=np.float32).reshape(4, 3)
    qa.write_fvecs(tmp_path / "x.fvecs", x)
    assert (tmp_path / "x.fvecs").stat().st_size == 4 * (4 + 4 * 3)
    np.testing.assert_array_equal(qa.read_fvecs(tmp_path / "x.fvecs"), x)
    np.testing.assert_array_equal(qa.read_fvecs(tmp_path / "x.fvecs", limit=2), x[:2])

    gt = np.array([[7, 9], [1, 2]], dtype=np.int32)
    qa.write_ivecs(tmp_path / "g.ivecs", gt)
    np.testing.assert_array_equal(qa.read_ivecs(tmp_path / "g.ivecs"), gt)


def test_malformed_file(tmp_path):
    (tmp_path / "bad.fvecs").write_bytes(b"\x02\x00\x00\x00\x00\x00")
    with pytest.raises(qa.FormatError):
        qa.read_fvecs(tmp_path / "bad.fvecs")


def test_encode_decode(data):
    pq = qa.train_pq(data["learn"], m=8, b=8, iters=4)
    assert (pq.d, pq.m, pq.b, pq.code_size) == (32, 8, 8, 8)
    codes = pq.encode(data["base"][:100])
    assert codes.shape == (100, 8) and codes.dtype == np.uint8
    rec = pq.decode(codes)
    err = np.mean(np.sum((rec - data["base"][:100]) ** 2, axis=1))
    assert err == pytest.approx(pq.reconstruction_error(data["base"][:100]), rel=1e-3)


def test_exhaustive_search_matches_brute_force_adc(data):
    pq = qa.train_pq(data["learn"], m=8, b=4, iters=4)
    index = qa.build_index(pq, data["base"])
    assert len(index) == 3000 and index.exhaustive
    ids, dist = qa.search(pq, index, data["queries"], R=10)
    assert ids.shape == (30, 10)
    rec = pq.decode(pq.encode(data["base"]))
    for q in range(5):
        d = np.sum((rec - data["queries"][q]) ** 2, axis=1)
        np.testing.assert_allclose(np.sort(d)[:10], dist[q], rtol=1e-3, atol=1e-2)
    assert np.all(np.diff(dist, axis=1) >= 0)


def test_quick_adc_recall_tracks_adc(data):
    coarse = qa.train_coarse(data["learn"], K=16, iters=5)
    pq = qa.train_pq(qa.residuals(coarse, data["learn"]), m=8, b=4, iters=5, opq=True, opq_iters=2)
    adc_index = qa.build_index(pq, data["base"], coarse=coarse)
    qadc_index = adc_index.with_layout("transposed16")
    assert qadc_index.layout == "transposed16" and qadc_index.list_count == 16
    gt = data["groundtruth"]
    ids_a, _ = qa.search(pq, adc_index, data["queries"], R=100, ma=4)
    ids_q, _ = qa.search(pq, qadc_index, data["queries"], R=100, ma=4, method="qadc")
    ra = qa.recall_at(ids_a, gt, 100)
    rq = qa.recall_at(ids_q, gt, 100)
    assert ra > 0.5
    assert abs(ra - rq) <= 0.1
    with pytest.raises(ValueError):
        qa.search(pq, adc_index, data["queries"], method="qadc")


def test_kernels_agree(data):
    pq = qa.train_pq(data["learn"], m=8, b=4, iters=3)
    index = qa.build_index(pq, data["base"], layout="transposed16")
    ref, _ = qa.search(pq, index, data["queries"], R=20, method="qadc", kernel="scalar")
    for kernel in ("128", "256"):
        if qa.kernel_available(kernel):
            got, _ = qa.search(pq, index, data["queries"], R=20, method="qadc", kernel=kernel)
            np.testing.assert_array_equal(got, ref)


def test_model_and_index_files(tmp_path, data):
    pq = qa.train_pq(data["learn"], m=4, b=4, iters=2)
    index = qa.build_index(pq, data["base"][:500])
    pq.save(tmp_path / "m.bin")
    index.save(tmp_path / "i.bin")
    pq2 = qa.ProductQuantizer.load(tmp_path / "m.bin")
    index2 = qa.Index.load(tmp_path / "i.bin")
    a, _ = qa.search(pq, index, data["queries"], R=5)
    b, _ = qa.search(pq2, index2, data["queries"], R=5)
    np.testing.assert_array_equal(a, b)


def test_recall_and_groundtruth():
    base = np.array([[0, 0], [1, 1], [5, 5]], dtype=np.float32)
    queries = np.array([[0.9, 0.9]], dtype=np.float32)
    gt = qa.exact_groundtruth(base, queries, depth=2)
    np.testing.assert_array_equal(gt, [[1, 0]])
    assert qa.recall_at(np.array([[2, 1]]), gt, 1) == 0.0
    assert qa.recall_at(np.array([[2, 1]]), gt, 2) == 1.0
