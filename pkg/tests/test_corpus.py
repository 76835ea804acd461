import os

import numpy as np
import pytest

from nopnet import corpus
from nopnet.errors import ConfigError, InputError

DATA = os.path.join(os.path.dirname(__file__), "data")

# What the checked-in Microsoft-style fragment must parse to, in file order.
FIXTURE_MNEMONICS = [
    "push", "mov", "sub", "lea", "push", "call", "test", "jz", "mov",
    "xor", "leave", "retn",
    "mov", "add", "xor", "nop", "div", "retn",
]


# -------------------------------------------------------------------- parser

def test_single_instruction_line():
    assert corpus.parse_asm(".text:00401000 55 push ebp") == ["push"]


def test_nop_line():
    assert corpus.parse_asm(".text:00408ABF 90 nop") == ["nop"]


def test_comment_line_yields_nothing():
    assert corpus.parse_asm(".text:00401005 ; comment") == []


def test_fixture_parses_to_expected_list():
    with open(os.path.join(DATA, "sample_listing.asm")) as fh:
        stats = {}
        assert corpus.parse_asm(fh.read(), stats) == FIXTURE_MNEMONICS
        assert stats["skipped_lines"] == 0


def test_operand_varied_twin_parses_identically():
    with open(os.path.join(DATA, "sample_listing.asm")) as fh:
        a = corpus.parse_asm(fh.read())
    with open(os.path.join(DATA, "sample_listing_operands.asm")) as fh:
        b = corpus.parse_asm(fh.read())
    assert a == b


def test_operand_invariance_minimal_pair():
    a = corpus.parse_asm(".text:00401000 8D 45 F8 lea eax, [esp+8]")
    b = corpus.parse_asm(".text:00401000 8D 45 F8 lea ebx, [esp+4]")
    assert a == b == ["lea"]


def test_parser_never_invents_tokens():
    text = open(os.path.join(DATA, "sample_listing.asm")).read()
    lowered = text.lower()
    for m in corpus.parse_asm(text):
        assert m in lowered


def test_unparseable_line_counts_warning():
    stats = {}
    out = corpus.parse_asm("this is not assembly at all\n"
                           ".text:00401000 55 push ebp", stats)
    assert out == ["push"]
    assert stats["skipped_lines"] == 1


def test_data_definitions_and_labels_skipped():
    text = "\n".join([
        ".data:00403000 68 65 6C aHi db 'Hi',0",
        ".data:00403008 00 00 00 00 dd 0",
        ".text:00401000 loc_401000:",
        ".text:00401004 align 4",
        ".text:00401008 C3 retn",
    ])
    assert corpus.parse_asm(text) == ["retn"]


# -------------------------------------------------------------------- vocab

def test_vocab_size_counts_reserved():
    v = corpus.MnemonicVocab.from_sequences([["mov", "push"], ["mov"]])
    assert v.size == 2 + 2  # mov, push + reserved nop, <unk>


def test_vocab_nop_always_present():
    v = corpus.MnemonicVocab.from_sequences([["mov"]])
    assert v.encode(["nop"])[0] == v.nop_id


def test_vocab_encode_decode_identity():
    seqs = [["push", "mov", "call"], ["nop", "xor"]]
    v = corpus.MnemonicVocab.from_sequences(seqs)
    for seq in seqs:
        assert v.decode(v.encode(seq)) == seq


def test_vocab_unknown_maps_to_unk_without_growing():
    v = corpus.MnemonicVocab.from_sequences([["mov"]])
    size_before = v.size
    ids = v.encode(["mov", "neverseen"])
    assert ids[1] == v.unk_id
    assert v.size == size_before


def test_vocab_lexicographic_order():
    v = corpus.MnemonicVocab.from_sequences([["zzz", "aaa", "mmm"]])
    assert v.encode(["aaa"])[0] < v.encode(["mmm"])[0] < v.encode(["zzz"])[0]


def test_vocab_json_roundtrip():
    v = corpus.MnemonicVocab.from_sequences([["mov", "push"]])
    w = corpus.MnemonicVocab.from_json(v.to_json())
    assert w.size == v.size and w.nop_id == v.nop_id
    assert np.array_equal(w.encode(["mov", "push"]), v.encode(["mov", "push"]))


# --------------------------------------------------------------------- masks

def test_mask_default_all_true():
    assert corpus.build_insert_mask(3).tolist() == [True] * 4


def test_mask_deny_position():
    assert corpus.build_insert_mask(3, deny=[0]).tolist() == [False, True, True, True]


def test_mask_all_denied_flags_sample_excluded():
    mask = corpus.build_insert_mask(2, deny=[0, 1, 2])
    s = corpus.Sample("x", 0, np.array([1, 2, 3]), corpus.build_insert_mask(3))
    assert s.eligible
    t = corpus.Sample("y", 0, np.array([1, 2]), mask)
    assert not t.eligible


def test_mask_deny_out_of_range():
    with pytest.raises(ConfigError):
        corpus.build_insert_mask(3, deny=[9])


def test_sample_mask_length_validated():
    with pytest.raises(InputError):
        corpus.Sample("x", 0, np.array([1, 2]), np.array([True, True]))


# ----------------------------------------------------------------- synthetic

def two_family_config(**kw):
    specs = [
        corpus.FamilySpec(length_range=(40, 60),
                          signatures=(("aaa", "bbb", "ccc"),)),
        corpus.FamilySpec(length_range=(40, 60),
                          signatures=(("ddd", "eee", "fff"),)),
    ]
    base = dict(families=2, samples_per_family=10, family_specs=specs, seed=5)
    base.update(kw)
    return corpus.SyntheticConfig(**base)


def contains_ngram(tokens, sig):
    k = len(sig)
    return any(tuple(tokens[i:i + k]) == tuple(sig) for i in range(len(tokens) - k + 1))


def test_planted_signatures_separate_families():
    records, signatures, _ = corpus.generate_synthetic_corpus(two_family_config())
    for _, family, toks in records:
        own, other = signatures[family][0], signatures[1 - family][0]
        assert contains_ngram(toks, own)
        assert not contains_ngram(toks, other)


def test_same_seed_identical_corpus():
    a, _, va = corpus.generate_synthetic_corpus(two_family_config())
    b, _, vb = corpus.generate_synthetic_corpus(two_family_config())
    assert a == b
    assert va.to_json() == vb.to_json()


def test_different_seed_differs():
    a, _, _ = corpus.generate_synthetic_corpus(two_family_config())
    b, _, _ = corpus.generate_synthetic_corpus(two_family_config(seed=6))
    assert a != b


def test_overlapping_signatures_rejected():
    specs = [
        corpus.FamilySpec(length_range=(40, 60), signatures=(("aaa", "bbb", "ccc"),)),
        corpus.FamilySpec(length_range=(40, 60), signatures=(("aaa", "bbb", "ccc"),)),
    ]
    cfg = corpus.SyntheticConfig(families=2, samples_per_family=5,
                                 family_specs=specs, seed=1)
    with pytest.raises(ConfigError):
        corpus.generate_synthetic_corpus(cfg)


def test_short_lengths_rejected():
    cfg = two_family_config()
    cfg.family_specs[0].length_range = (10, 60)
    with pytest.raises(ConfigError):
        corpus.generate_synthetic_corpus(cfg)


def test_single_family_rejected():
    cfg = two_family_config()
    cfg.families = 1
    cfg.family_specs = cfg.family_specs[:1]
    with pytest.raises(ConfigError):
        corpus.generate_synthetic_corpus(cfg)


def test_nop_bearing_flag_controls_signatures_only():
    # NOP-bearing families carry NOP inside a signature; other families'
    # signatures never contain it. Background NOPs are allowed everywhere.
    specs = [
        corpus.FamilySpec(length_range=(40, 60), nop_bearing=True),
        corpus.FamilySpec(length_range=(40, 60), nop_bearing=False),
    ]
    cfg = corpus.SyntheticConfig(families=2, samples_per_family=5,
                                 family_specs=specs, seed=2)
    records, signatures, _ = corpus.generate_synthetic_corpus(cfg)
    assert any("nop" in sig for sig in signatures[0])
    assert all("nop" not in sig for sig in signatures[1])
    nop_planted = [r for r in records if r[1] == 0]
    assert all("nop" in toks for _, _, toks in nop_planted)


def test_at_least_three_plantings_per_sample():
    cfg = two_family_config(plantings_range=(3, 3))
    records, signatures, _ = corpus.generate_synthetic_corpus(cfg)
    for _, family, toks in records:
        sig = signatures[family][0]
        count = sum(tuple(toks[i:i + len(sig)]) == sig
                    for i in range(len(toks) - len(sig) + 1))
        assert count >= 3


# -------------------------------------------------------------------- splits

def ids_for(n_per_family, families=2):
    return {f: [f"fam{f}-{i}" for i in range(n_per_family)]
            for f in range(families)}


def test_split_70_15_15_exact():
    out = corpus.split_corpus(ids_for(100), (0.7, 0.15, 0.15), seed=1)
    for f in range(2):
        counts = {s: 0 for s in corpus.SPLITS}
        for i in range(100):
            counts[out[f"fam{f}-{i}"]] += 1
        assert counts == {"train": 70, "val": 15, "test": 15}


def test_split_all_train():
    out = corpus.split_corpus(ids_for(10), (1.0, 0.0, 0.0), seed=1)
    assert all(v == "train" for v in out.values())


def test_split_two_seeds_same_counts_different_assignment():
    a = corpus.split_corpus(ids_for(40), (0.5, 0.25, 0.25), seed=1)
    b = corpus.split_corpus(ids_for(40), (0.5, 0.25, 0.25), seed=2)
    assert a != b
    for out in (a, b):
        assert sum(1 for v in out.values() if v == "train") == 40


def test_split_disjoint_and_covering():
    ids = ids_for(30, families=3)
    out = corpus.split_corpus(ids, (0.7, 0.15, 0.15), seed=9)
    all_ids = [i for fam in ids.values() for i in fam]
    assert sorted(out) == sorted(all_ids)


def test_split_ratios_must_sum_to_one():
    with pytest.raises(ConfigError):
        corpus.split_corpus(ids_for(10), (0.5, 0.2, 0.2), seed=1)


def test_split_tiny_family_rejected():
    with pytest.raises(ConfigError):
        corpus.split_corpus({0: ["a", "b"]}, (0.7, 0.15, 0.15), seed=1)


def test_split_within_one_sample_of_ratios():
    out = corpus.split_corpus(ids_for(37), (0.7, 0.15, 0.15), seed=3)
    counts = {s: 0 for s in corpus.SPLITS}
    for v in out.values():
        if v in counts:
            counts[v] += 1
    counts = {k: v / 2 for k, v in counts.items()}  # two families
    assert abs(counts["train"] - 37 * 0.7) <= 1
    assert abs(counts["val"] - 37 * 0.15) <= 1
    assert abs(counts["test"] - 37 * 0.15) <= 1


# ------------------------------------------------------------------- disk IO

def test_corpus_roundtrip_on_disk(tmp_path):
    cfg = two_family_config()
    records, _, vocab = corpus.generate_synthetic_corpus(cfg)
    assignment = corpus.split_corpus(
        {f: [r[0] for r in records if r[1] == f] for f in range(2)},
        (0.7, 0.15, 0.15), seed=1)
    corpus.write_corpus(str(tmp_path), records, vocab, assignment)
    loaded_vocab = corpus.load_vocab(str(tmp_path))
    samples = corpus.load_samples(str(tmp_path), loaded_vocab)
    assert len(samples) == len(records)
    by_id = {r[0]: r[2] for r in records}
    for s in samples:
        assert loaded_vocab.decode(s.tokens) == by_id[s.id]
        assert len(s.insert_mask) == len(s.tokens) + 1


def test_load_samples_parses_asm_files(tmp_path):
    os.makedirs(tmp_path / "tokens")
    import shutil
    shutil.copy(os.path.join(DATA, "sample_listing.asm"),
                tmp_path / "tokens" / "s0.asm")
    with open(tmp_path / "manifest.csv", "w") as fh:
        fh.write("id,family,path,split\ns0,0,tokens/s0.asm,train\n")
    vocab = corpus.MnemonicVocab.from_sequences([FIXTURE_MNEMONICS])
    with open(tmp_path / "vocab.json", "w") as fh:
        fh.write(vocab.to_json())
    samples = corpus.load_samples(str(tmp_path), vocab)
    assert vocab.decode(samples[0].tokens) == FIXTURE_MNEMONICS
