"""Assembly-listing ingestion and the synthetic sample generator.

Real input is IDA-style listing text in the Microsoft BIG layout
(`SEGMENT:ADDRESS  [byte columns]  MNEMONIC  [operands]`). The parser keeps
one lowercase mnemonic per machine instruction and drops everything else:
directives, labels, data definitions, comments. Unparseable lines are counted
and skipped, never fatal.

The synthetic generator replaces the (unavailable) real dataset: per family,
background mnemonics drawn from one shared distribution with family-specific
signature n-grams planted several times per sample.
"""

import csv
import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, MissingArtifactError

# --------------------------------------------------------------------- parser

_ADDR_RE = re.compile(r"^([.\w$?@]+):([0-9A-Fa-f]+)\s*(.*)$")
# Raw byte columns are uppercase hex pairs (plus IDA's ?? and trailing +);
# lowercase db/dd data mnemonics therefore survive the skip.
_BYTE_RE = re.compile(r"^[0-9A-F]{2}\+?$|^\?\?$")
_MNEMONIC_RE = re.compile(r"^[A-Za-z]\w*$")

_DATA_DEFS = {"db", "dw", "dd", "dq", "dt", "df", "do", "unicode"}
_STRUCT_KEYWORDS = {
    "proc", "endp", "segment", "ends", "assume", "public", "extrn", "extern",
    "include", "model", "align", "org", "end", "equ", "struc", "struct",
    "union", "label", "=",
}


def parse_asm(text, stats=None):
    """Extract the mnemonic sequence from an IDA-style listing.

    stats, when a dict, receives a "skipped_lines" count of lines that matched
    no known construct.
    """
    mnemonics = []
    skipped = 0
    for raw in text.splitlines():
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = _ADDR_RE.match(line)
        if m is None:
            parts = line.split()
            if (parts[0].startswith(".") or parts[0].lower() in _STRUCT_KEYWORDS
                    or (len(parts) > 1 and parts[1].lower() in _STRUCT_KEYWORDS)):
                continue
            skipped += 1
            continue
        tokens = m.group(3).split()
        idx = 0
        while idx < len(tokens) and _BYTE_RE.match(tokens[idx]):
            idx += 1
        if idx >= len(tokens):
            continue  # address-only or raw data bytes
        cand = tokens[idx]
        low = cand.lower()
        if cand.startswith(".") or cand.endswith(":"):
            continue
        if low in _DATA_DEFS or low in _STRUCT_KEYWORDS:
            continue
        nxt = tokens[idx + 1].lower() if idx + 1 < len(tokens) else None
        if nxt in _DATA_DEFS or nxt in _STRUCT_KEYWORDS:
            continue  # named data/struct definition, e.g. "aHello db 'hello'"
        if not _MNEMONIC_RE.match(cand):
            skipped += 1
            continue
        mnemonics.append(low)
    if stats is not None:
        stats["skipped_lines"] = stats.get("skipped_lines", 0) + skipped
    return mnemonics


# ---------------------------------------------------------------- vocabulary

NOP_MNEMONIC = "nop"
UNK_MNEMONIC = "<unk>"


class MnemonicVocab:
    """Frozen mnemonic <-> id map; NOP always present, one reserved UNK id."""

    def __init__(self, mnemonic_to_id):
        if NOP_MNEMONIC not in mnemonic_to_id:
            raise ConfigError("vocabulary must contain 'nop'")
        if UNK_MNEMONIC not in mnemonic_to_id:
            raise ConfigError("vocabulary must contain the unknown marker")
        self._to_id = dict(mnemonic_to_id)
        self._to_mnemonic = {i: m for m, i in self._to_id.items()}
        if len(self._to_mnemonic) != len(self._to_id):
            raise ConfigError("vocabulary ids must be unique")
        self.nop_id = self._to_id[NOP_MNEMONIC]
        self.unk_id = self._to_id[UNK_MNEMONIC]
        self.size = len(self._to_id)

    @classmethod
    def from_sequences(cls, sequences):
        """Lexicographically ordered ids over all distinct mnemonics (+nop, +unk)."""
        seen = set()
        for seq in sequences:
            seen.update(seq)
        seen.add(NOP_MNEMONIC)
        seen.discard(UNK_MNEMONIC)
        names = sorted(seen)
        mapping = {m: i for i, m in enumerate(names)}
        mapping[UNK_MNEMONIC] = len(names)
        return cls(mapping)

    def encode(self, mnemonics):
        return np.array([self._to_id.get(m, self.unk_id) for m in mnemonics],
                        dtype=np.int64)

    def decode(self, ids):
        return [self._to_mnemonic[int(i)] for i in ids]

    def to_json(self):
        return json.dumps(self._to_id, indent=0, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(json.loads(text))


# -------------------------------------------------------------------- samples

@dataclass
class Sample:
    id: str
    family: int
    tokens: np.ndarray          # int64 mnemonic ids, length N >= 1
    insert_mask: np.ndarray     # bool, length N + 1; slot i = insert before token i

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.insert_mask = np.asarray(self.insert_mask, dtype=bool)
        if len(self.tokens) < 1:
            raise InputError(f"sample {self.id}: empty token sequence")
        if len(self.insert_mask) != len(self.tokens) + 1:
            raise InputError(f"sample {self.id}: mask length {len(self.insert_mask)} "
                             f"!= tokens + 1 = {len(self.tokens) + 1}")

    @property
    def eligible(self):
        """False when every insertion slot is denied (excluded from episodes)."""
        return bool(self.insert_mask.any())


def build_insert_mask(n_tokens, deny=()):
    """All-true boundary mask of length N+1 with the deny-listed slots cleared."""
    mask = np.ones(n_tokens + 1, dtype=bool)
    for pos in deny:
        if not 0 <= pos <= n_tokens:
            raise ConfigError(f"deny position {pos} outside [0, {n_tokens}]")
        mask[pos] = False
    return mask


# ----------------------------------------------------------------- synthetic

# Common x86 mnemonics for readable synthetic listings; extended with opNNN
# names when a larger background vocabulary is requested.
_BASE_MNEMONICS = [
    "aaa", "adc", "add", "and", "bswap", "bt", "call", "cbw", "cdq", "clc",
    "cld", "cmc", "cmp", "cmpsb", "cwd", "dec", "div", "enter", "fabs",
    "fadd", "fchs", "fcom", "fdiv", "fild", "fist", "fld", "fmul", "fst",
    "fsub", "fxch", "idiv", "imul", "in", "inc", "int", "ja", "jae", "jb",
    "jbe", "jcxz", "je", "jg", "jge", "jl", "jle", "jmp", "jna", "jnb",
    "jne", "jno", "jns", "jnz", "jo", "js", "jz", "lahf", "lea", "leave",
    "lodsb", "loop", "mov", "movsb", "movsx", "movzx", "mul", "neg", "nop",
    "not", "or", "out", "pop", "popa", "popf", "push", "pusha", "pushf",
    "rcl", "rcr", "rep", "ret", "retn", "rol", "ror", "sahf", "sal", "sar",
    "sbb", "scasb", "seta", "setb", "sete", "setg", "setl", "setne", "shl",
    "shld", "shr", "shrd", "stc", "std", "stosb", "sub", "test", "wait",
    "xadd", "xchg", "xlat", "xor",
]


@dataclass
class FamilySpec:
    """Generation recipe for one synthetic family."""
    length_range: tuple = (200, 2000)
    signatures: tuple = ()      # tuples of mnemonics, filled in when empty
    nop_bearing: bool = False


@dataclass
class SyntheticConfig:
    families: int = 9
    samples_per_family: int = 200
    family_specs: list = field(default_factory=list)  # FamilySpec per family
    signatures_per_family: int = 3
    signature_lengths: tuple = (3, 5, 7)
    plantings_range: tuple = (3, 6)   # total plantings per sample, inclusive
    background_vocab: int = 120
    seed: int = 7


def _background_pool(size):
    # NOP stays in the shared background for every family: a lone inserted
    # NOP must be unremarkable, so evasion pressure lands on the signature
    # n-grams instead of mere NOP presence.
    pool = list(_BASE_MNEMONICS)
    i = 0
    while len(pool) < size:
        name = f"op{i:03d}"
        if name not in pool:
            pool.append(name)
        i += 1
    return pool[:size]


def _background_probs(size):
    # Mildly skewed frequencies; flat enough that no trigram of mid-band
    # tokens is likely to appear by chance.
    w = 1.0 / (np.arange(size) + 10.0)
    return w / w.sum()


def _derive_signatures(cfg, pool, rng):
    """One signature tuple set per family, disjoint by construction.

    Signature tokens come from the middle of the frequency band so chance
    background occurrences are negligible. NOP-bearing families get a
    NOP-flanked first signature (nop, x, nop) with a family-private middle
    token: inserting a NOP inside it recreates the same window, so dead-code
    insertion cannot destroy that pattern, and the private middle cannot be
    conjured in other families' samples by inserting NOPs alone.
    """
    lo, hi = len(pool) // 4, (3 * len(pool)) // 4
    band = [m for m in pool[lo:hi] if m != NOP_MNEMONIC]
    used = set()
    per_family = []
    for f in range(cfg.families):
        spec = cfg.family_specs[f]
        if spec.signatures:
            per_family.append(tuple(tuple(s) for s in spec.signatures))
            continue
        sigs = []
        for s in range(cfg.signatures_per_family):
            length = cfg.signature_lengths[s % len(cfg.signature_lengths)]
            if spec.nop_bearing and s == 0:
                sig = (NOP_MNEMONIC, f"uop{f:02d}", NOP_MNEMONIC)
                used.add(sig)
                sigs.append(sig)
                continue
            while True:
                sig = tuple(band[i] for i in rng.choice(len(band), size=length,
                                                        replace=False))
                if sig not in used:
                    used.add(sig)
                    sigs.append(sig)
                    break
        per_family.append(tuple(sigs))
    return per_family


def _validate_signatures(per_family):
    seen = {}
    for f, sigs in enumerate(per_family):
        if not sigs:
            raise ConfigError(f"family {f} has no signatures")
        for sig in sigs:
            if not 3 <= len(sig) <= 7:
                raise ConfigError(f"family {f} signature length {len(sig)} "
                                  "outside [3, 7]")
            if sig in seen and seen[sig] != f:
                raise ConfigError(
                    f"signature {sig} shared by families {seen[sig]} and {f}")
            seen[sig] = f


def generate_synthetic_corpus(cfg):
    """Build (samples-as-mnemonics, per-family signatures, vocab).

    Deterministic under cfg.seed. Returns a list of (sample_id, family,
    mnemonic list) triples plus the vocabulary over the generated corpus.
    """
    if cfg.families < 2:
        raise ConfigError("need at least 2 families")
    if not cfg.family_specs:
        cfg.family_specs = [FamilySpec() for _ in range(cfg.families)]
    if len(cfg.family_specs) != cfg.families:
        raise ConfigError(f"{len(cfg.family_specs)} family specs for "
                          f"{cfg.families} families")
    for f, spec in enumerate(cfg.family_specs):
        if spec.length_range[0] < 20:
            raise ConfigError(f"family {f}: minimum length below 20")
        if spec.length_range[0] > spec.length_range[1]:
            raise ConfigError(f"family {f}: empty length range")

    rng = np.random.default_rng(cfg.seed)
    pool = _background_pool(cfg.background_vocab)
    probs = _background_probs(len(pool))
    signatures = _derive_signatures(cfg, pool, rng)
    _validate_signatures(signatures)

    records = []
    for f in range(cfg.families):
        spec = cfg.family_specs[f]
        sigs = signatures[f]
        lo, hi = spec.length_range
        for i in range(cfg.samples_per_family):
            length = int(rng.integers(lo, hi + 1))
            idx = rng.choice(len(pool), size=length, p=probs)
            toks = [pool[j] for j in idx]
            n_plant = int(rng.integers(cfg.plantings_range[0],
                                       cfg.plantings_range[1] + 1))
            taken = []
            for k in range(n_plant):
                sig = sigs[k % len(sigs)]
                # Non-overlapping plant positions, overwriting background.
                for _ in range(200):
                    start = int(rng.integers(0, length - len(sig) + 1))
                    span = (start, start + len(sig))
                    if all(span[1] <= a or span[0] >= b for a, b in taken):
                        taken.append(span)
                        toks[span[0]:span[1]] = list(sig)
                        break
            records.append((f"fam{f}-{i:04d}", f, toks))

    vocab = MnemonicVocab.from_sequences(toks for _, _, toks in records)
    return records, signatures, vocab


# --------------------------------------------------------------------- splits

SPLITS = ("train", "val", "test")


def split_corpus(ids_by_family, ratios, seed):
    """Stratified split assignment: {sample_id: split}, deterministic under seed.

    Largest-remainder rounding keeps each family within one sample of the
    configured ratios.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios sum to {sum(ratios)}, expected 1")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError("expected three nonnegative ratios (train, val, test)")
    rng = np.random.default_rng(seed)
    assignment = {}
    for family in sorted(ids_by_family):
        ids = sorted(ids_by_family[family])
        if len(ids) < 3:
            raise ConfigError(f"family {family} has {len(ids)} samples; need >= 3")
        order = rng.permutation(len(ids))
        exact = [len(ids) * r for r in ratios]
        counts = [int(c) for c in exact]
        remainders = [e - c for e, c in zip(exact, counts)]
        while sum(counts) < len(ids):
            k = max(range(3), key=lambda j: (remainders[j], -j))
            counts[k] += 1
            remainders[k] = -1.0
        cursor = 0
        for split, count in zip(SPLITS, counts):
            for j in order[cursor:cursor + count]:
                assignment[ids[j]] = split
            cursor += count
    return assignment


# ------------------------------------------------------------------- disk IO

@dataclass
class ManifestRow:
    id: str
    family: int
    path: str
    split: str


def write_corpus(out_dir, records, vocab, assignment, extra_meta=None):
    """Lay a corpus on disk: tokens/*.tokens, manifest.csv, vocab.json."""
    tok_dir = os.path.join(out_dir, "tokens")
    os.makedirs(tok_dir, exist_ok=True)
    rows = []
    for sample_id, family, toks in records:
        rel = os.path.join("tokens", f"{sample_id}.tokens")
        with open(os.path.join(out_dir, rel), "w") as fh:
            fh.write(" ".join(toks) + "\n")
        rows.append(ManifestRow(sample_id, family, rel, assignment[sample_id]))
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "family", "path", "split"])
        for r in rows:
            writer.writerow([r.id, r.family, r.path, r.split])
    with open(os.path.join(out_dir, "vocab.json"), "w") as fh:
        fh.write(vocab.to_json())
    if extra_meta is not None:
        with open(os.path.join(out_dir, "corpus_meta.json"), "w") as fh:
            json.dump(extra_meta, fh, indent=2, sort_keys=True)
    return rows


def read_manifest(corpus_dir):
    path = os.path.join(corpus_dir, "manifest.csv")
    if not os.path.exists(path):
        raise MissingArtifactError(f"no manifest.csv under {corpus_dir}")
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["split"] not in SPLITS:
                raise InputError(f"manifest row {rec['id']}: bad split {rec['split']!r}")
            rows.append(ManifestRow(rec["id"], int(rec["family"]),
                                    rec["path"], rec["split"]))
    return rows


def load_vocab(corpus_dir):
    path = os.path.join(corpus_dir, "vocab.json")
    if not os.path.exists(path):
        raise MissingArtifactError(f"no vocab.json under {corpus_dir}")
    with open(path) as fh:
        return MnemonicVocab.from_json(fh.read())


def load_samples(corpus_dir, vocab, split=None, family=None, deny=()):
    """Materialize Samples from a corpus directory, optionally filtered.

    .tokens files hold whitespace-separated mnemonics; .asm files go through
    the listing parser first.
    """
    out = []
    for row in read_manifest(corpus_dir):
        if split is not None and row.split != split:
            continue
        if family is not None and row.family != family:
            continue
        path = os.path.join(corpus_dir, row.path)
        if not os.path.exists(path):
            raise MissingArtifactError(f"sample file missing: {path}")
        with open(path) as fh:
            text = fh.read()
        if row.path.endswith(".asm"):
            mnemonics = parse_asm(text)
        else:
            mnemonics = text.split()
        if not mnemonics:
            raise InputError(f"sample {row.id}: no instructions found")
        tokens = vocab.encode(mnemonics)
        out.append(Sample(row.id, row.family, tokens,
                          build_insert_mask(len(tokens), deny)))
    return out
