"""Balanced presentation blocks, catch trials, practice sets, session shuffles.

A test set of P pairs with n instances per word (2n recordings per pair)
splits into B blocks holding 2n/B recordings per pair, all of one word
side within a block; each side lands in exactly B/2 blocks. Blocks come
out balanced for talker gender and for feature presence/absence by
construction: pairs are coupled within each feature class and coupled
pairs receive complementary side patterns and complementary per-block
gender quotas, so imbalance never exceeds the odd leftover pair.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus import Recording, TestSet, WordList
from .errors import BalanceError


@dataclass(frozen=True)
class BlockItem:
    recording_id: str
    pair_id: str
    word_present: str
    word_absent: str
    correct_side: str
    talker_gender: str
    is_catch: bool = False

    def choices(self) -> tuple[str, str]:
        return (self.word_present, self.word_absent)

    def correct_word(self) -> str:
        return self.word_present if self.correct_side == "present" else self.word_absent


@dataclass(frozen=True)
class BlockPlan:
    block_id: str
    condition: str
    language: str
    items: tuple[BlockItem, ...]

    def scored_items(self) -> list[BlockItem]:
        return [it for it in self.items if not it.is_catch]

    def catch_items(self) -> list[BlockItem]:
        return [it for it in self.items if it.is_catch]


@dataclass(frozen=True)
class PracticeSet:
    items: tuple[BlockItem, ...]


def _item_from_recording(rec: Recording, word_list: WordList,
                         is_catch: bool = False) -> BlockItem:
    pair = word_list.by_id()[rec.pair_id]
    return BlockItem(
        recording_id=rec.recording_id,
        pair_id=rec.pair_id,
        word_present=pair.word_present,
        word_absent=pair.word_absent,
        correct_side=rec.word_side,
        talker_gender=rec.talker_gender,
        is_catch=is_catch,
    )


def build_blocks(test_set: TestSet, block_count: int, seed: int) -> list[BlockPlan]:
    """Partition a valid test set into `block_count` balanced blocks.

    Every recording is used exactly once. B = 1 is a degenerate single
    block (the one-side-per-pair constraint is relaxed; debugging only).
    Raises BalanceError when B does not divide the recordings per pair or
    the side/gender splits cannot be satisfied.
    """
    word_list = test_set.word_list
    pairs = list(word_list.pairs)
    n_inst = test_set.instances_per_word
    tokens_per_pair = 2 * n_inst
    B = block_count
    if B < 1:
        raise BalanceError(f"block count must be >= 1, got {B}")
    if tokens_per_pair % B != 0:
        raise BalanceError(
            f"block count {B} does not divide {tokens_per_pair} recordings "
            f"per pair")

    language = word_list.language
    condition = test_set.condition
    pair_lookup = word_list.by_id()

    if B == 1:
        items = [_item_from_recording(r, word_list)
                 for r in sorted(test_set.recordings,
                                 key=lambda r: (r.pair_id, r.recording_id))]
        return [BlockPlan("block-01", condition, language, tuple(items))]

    if B % 2 != 0:
        raise BalanceError(
            f"unsatisfiable balance: each word side must appear in exactly "
            f"B/2 blocks, impossible for odd B={B}")
    half = B // 2
    if n_inst % half != 0:
        raise BalanceError(
            f"unsatisfiable balance: {n_inst} instances per side do not "
            f"split evenly over {half} blocks per side")
    t = tokens_per_pair // B  # recordings of one pair in one block

    rng = random.Random(seed)
    by_pair_side: dict[tuple[str, str], list[Recording]] = {}
    for rec in test_set.recordings:
        by_pair_side.setdefault((rec.pair_id, rec.word_side), []).append(rec)

    # Phase 1: side patterns. Couple pairs within each feature class; the
    # second pair of a couple shows 'present' exactly where the first shows
    # 'absent', keeping per-class side counts balanced in every block. A
    # class of odd size leaves one pair over; leftovers chain across classes
    # (their pattern is free with respect to their own class), so at most
    # one pair in the whole list stays uncoupled.
    classes: dict[str, list[str]] = {}
    for p in pairs:
        classes.setdefault(p.feature_class, []).append(p.pair_id)

    present_blocks: dict[str, tuple[int, ...]] = {}
    couple_lead: dict[str, str | None] = {}  # pair -> its couple lead, or None
    order: list[str] = []  # leads always precede their couples
    pending: str | None = None

    def _complement(pattern: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(b for b in range(B) if b not in pattern)

    for cls in classes.values():
        ids = list(cls)
        rng.shuffle(ids)
        for i in range(0, len(ids) - 1, 2):
            pattern = tuple(sorted(rng.sample(range(B), half)))
            present_blocks[ids[i]] = pattern
            couple_lead[ids[i]] = None
            present_blocks[ids[i + 1]] = _complement(pattern)
            couple_lead[ids[i + 1]] = ids[i]
            order.extend((ids[i], ids[i + 1]))
        if len(ids) % 2:
            last = ids[-1]
            if pending is None:
                present_blocks[last] = tuple(sorted(rng.sample(range(B), half)))
                couple_lead[last] = None
                pending = last
            else:
                present_blocks[last] = _complement(present_blocks[pending])
                couple_lead[last] = pending
                pending = None
            order.append(last)

    # Phase 2: per (pair, side), deal the instances to the side's blocks.
    # Gender quotas per block are t/2 each when t is even. For odd t, half
    # the blocks of each side take an extra female; a coupled pair inverts
    # its lead's quotas per block, so every couple contributes an exactly
    # balanced gender mix to every block and only the lone uncoupled pair
    # (if any) can shift a block by one.
    n_f = n_inst // 2
    quotas_by_pair: dict[str, dict[int, int]] = {}

    def _deal(pair_id: str, side: str, blocks_for_side: tuple[int, ...],
              quotas: dict[int, int], assignment: dict[int, list[Recording]]):
        recs = sorted(by_pair_side.get((pair_id, side), []),
                      key=lambda r: r.recording_id)
        females = [r for r in recs if r.talker_gender == "female"]
        males = [r for r in recs if r.talker_gender == "male"]
        if len(females) != n_f or len(males) != n_inst - n_f:
            raise BalanceError(
                f"pair '{pair_id}' side '{side}' is not gender-balanced "
                f"({len(females)}F/{len(males)}M of {n_inst})")
        rng.shuffle(females)
        rng.shuffle(males)
        fi = mi = 0
        for b in blocks_for_side:
            nf = quotas[b]
            take = females[fi:fi + nf] + males[mi:mi + (t - nf)]
            fi += nf
            mi += t - nf
            assignment.setdefault(b, []).extend(take)

    assignment: dict[int, list[Recording]] = {b: [] for b in range(B)}
    for pid in order:
        pres = present_blocks[pid]
        abst = _complement(pres)
        if t % 2 == 0:
            quotas = {b: t // 2 for b in range(B)}
        else:
            heavy_count = n_f - half * (t // 2)  # side blocks with an extra F
            lead = couple_lead[pid]
            if lead is None:
                pres_heavy = set(rng.sample(pres, heavy_count))
                abst_heavy = set(rng.sample(abst, heavy_count))
                quotas = {b: (t // 2 + 1 if (b in pres_heavy or b in abst_heavy)
                              else t // 2) for b in range(B)}
            else:
                quotas = {b: t - quotas_by_pair[lead][b] for b in range(B)}
        quotas_by_pair[pid] = quotas
        _deal(pid, "present", pres, quotas, assignment)
        _deal(pid, "absent", abst, quotas, assignment)

    plans = []
    for b in range(B):
        recs = sorted(assignment[b], key=lambda r: (r.pair_id, r.recording_id))
        if len(recs) != len(pairs) * t:
            raise BalanceError(f"internal: block {b} holds {len(recs)} items, "
                               f"expected {len(pairs) * t}")
        items = tuple(_item_from_recording(r, word_list) for r in recs)
        plans.append(BlockPlan(f"block-{b + 1:02d}", condition, language, items))
    _check_balance(plans, pair_lookup)
    return plans


def _check_balance(plans: list[BlockPlan], pair_lookup) -> None:
    for plan in plans:
        scored = plan.scored_items()
        females = sum(1 for it in scored if it.talker_gender == "female")
        if abs(2 * females - len(scored)) > 1:
            raise BalanceError(f"{plan.block_id}: gender imbalance "
                               f"{females}F/{len(scored) - females}M")
        sides: dict[str, str] = {}
        per_class: dict[str, int] = {}
        for it in scored:
            prev = sides.setdefault(it.pair_id, it.correct_side)
            if prev != it.correct_side:
                raise BalanceError(f"{plan.block_id}: pair '{it.pair_id}' "
                                   f"appears with both word sides")
        for pid, side in sides.items():
            cls = pair_lookup[pid].feature_class
            per_class[cls] = per_class.get(cls, 0) + (1 if side == "present" else -1)
        for cls, excess in per_class.items():
            if abs(excess) > 1:
                raise BalanceError(f"{plan.block_id}: feature class '{cls}' "
                                   f"side imbalance {excess}")


def inject_catch_trials(block: BlockPlan, wb_pool: TestSet, n: int = 20,
                        seed: int = 0) -> BlockPlan:
    """Append n catch trials drawn from WB recordings of unscheduled pairs.

    Candidates are restricted to pairs absent from the block so a scored
    word is never heard twice in one session. Raises BalanceError naming
    the shortfall when the pool cannot supply n such recordings.
    """
    if n == 0:
        return block
    scheduled = {it.pair_id for it in block.items}
    candidates = sorted(
        (r for r in wb_pool.recordings if r.pair_id not in scheduled),
        key=lambda r: r.recording_id)
    if len(candidates) < n:
        raise BalanceError(
            f"catch-trial pool has only {len(candidates)} recordings from "
            f"pairs outside the block; {n} required")
    rng = random.Random(seed)
    chosen = rng.sample(candidates, n)
    catch = tuple(_item_from_recording(r, wb_pool.word_list, is_catch=True)
                  for r in chosen)
    return BlockPlan(block.block_id, block.condition, block.language,
                     block.items + catch)


def select_practice(wb_set: TestSet, n: int = 16, seed: int = 0) -> PracticeSet:
    """Pick n practice items from the WB pool, gender-balanced within 1."""
    recs = sorted(wb_set.recordings, key=lambda r: r.recording_id)
    if len(recs) < n:
        raise BalanceError(f"practice pool has {len(recs)} recordings, "
                           f"{n} required")
    rng = random.Random(seed)
    females = [r for r in recs if r.talker_gender == "female"]
    males = [r for r in recs if r.talker_gender == "male"]
    rng.shuffle(females)
    rng.shuffle(males)
    n_f = n // 2
    n_m = n - n_f
    if rng.random() < 0.5:  # which gender absorbs the odd item
        n_f, n_m = n_m, n_f
    if len(females) < n_f or len(males) < n_m:
        raise BalanceError(f"practice pool cannot supply {n_f}F/{n_m}M "
                           f"(has {len(females)}F/{len(males)}M)")
    chosen = females[:n_f] + males[:n_m]
    chosen.sort(key=lambda r: r.recording_id)
    items = tuple(_item_from_recording(r, wb_set.word_list) for r in chosen)
    return PracticeSet(items)


def shuffle_for_session(block: BlockPlan, session_seed: int) -> list[BlockItem]:
    """Seeded permutation of the block with catch trials never 3 in a row."""
    items = list(block.items)
    rng = random.Random(session_seed)
    for _ in range(1000):
        order = rng.sample(items, len(items))
        if _max_catch_run(order) <= 2:
            return order
    # Degenerate compositions (mostly catch): spread scored items evenly.
    catch = [it for it in items if it.is_catch]
    scored = [it for it in items if not it.is_catch]
    rng.shuffle(catch)
    rng.shuffle(scored)
    out: list[BlockItem] = []
    ci = si = 0
    while ci < len(catch) or si < len(scored):
        out.extend(catch[ci:ci + 2])
        ci += 2
        if si < len(scored):
            out.append(scored[si])
            si += 1
    return out


def _max_catch_run(order: list[BlockItem]) -> int:
    run = best = 0
    for it in order:
        run = run + 1 if it.is_catch else 0
        best = max(best, run)
    return best


# Serialization: stable field order for reproducibility diffs.

def plans_to_json(plans: list[BlockPlan]) -> str:
    doc = {
        "blocks": [
            {
                "block_id": p.block_id,
                "condition": p.condition,
                "language": p.language,
                "items": [
                    {
                        "recording_id": it.recording_id,
                        "pair_id": it.pair_id,
                        "word_present": it.word_present,
                        "word_absent": it.word_absent,
                        "correct_side": it.correct_side,
                        "talker_gender": it.talker_gender,
                        "is_catch": it.is_catch,
                    }
                    for it in p.items
                ],
            }
            for p in plans
        ]
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def plans_from_json(text: str) -> list[BlockPlan]:
    doc = json.loads(text)
    plans = []
    for p in doc["blocks"]:
        items = tuple(BlockItem(**it) for it in p["items"])
        plans.append(BlockPlan(p["block_id"], p["condition"], p["language"],
                               items))
    return plans


def save_plans(path: str | Path, plans: list[BlockPlan]) -> None:
    Path(path).write_text(plans_to_json(plans), encoding="utf-8")


def load_plans(path: str | Path) -> list[BlockPlan]:
    return plans_from_json(Path(path).read_text(encoding="utf-8"))
