import itertools
import random

import pytest

from gentrieval.constraint import (STRATEGIES, FmIndexAutomaton,
                                   TermSetAutomaton, TrieAutomaton, build)
from gentrieval.corpus import END, SEP
from gentrieval.docid import DocIdIndex
from gentrieval.errors import (EmptyIndex, IllegalTransition, InvalidState,
                               NotTerminal)
from gentrieval.fm_index import FMIndex, SequenceFMIndex, suffix_array

from conftest import (TOY_SURFACES, enumerate_accepted, make_index,
                      random_record_index)


def naive_suffix_array(seq):
    return sorted(range(len(seq)), key=lambda i: seq[i:])


def naive_occurrences(seq, pattern):
    if not pattern:
        return len(seq) + 1
    return sum(1 for i in range(len(seq) - len(pattern) + 1)
               if seq[i:i + len(pattern)] == pattern)


class TestFMIndex:
    def test_suffix_array_matches_naive(self):
        rng = random.Random(0)
        for _ in range(50):
            seq = [rng.randint(0, 5) for _ in range(rng.randint(1, 40))]
            assert suffix_array(seq) == naive_suffix_array(seq)

    def test_repeated_symbol_sequence(self):
        seq = [2, 2, 3, 2, 2, 3, 2]
        assert suffix_array(seq) == naive_suffix_array(seq)

    def test_match_counts(self):
        seq = [5, 2, 3, 2, 3, 2, 9]
        fm = FMIndex(seq)
        assert fm.count_range(fm.match([2, 3])) == 2
        assert fm.count_range(fm.match([3, 2])) == 2
        assert fm.count_range(fm.match([9, 9])) == 0
        assert fm.count_range(fm.match([5])) == 1

    def test_occurrences_match_naive(self):
        rng = random.Random(1)
        for _ in range(100):
            seq = [rng.randint(0, 4) for _ in range(rng.randint(1, 30))]
            sfm = SequenceFMIndex(seq)
            pattern = [rng.randint(0, 4) for _ in range(rng.randint(1, 4))]
            assert sfm.occurrences(pattern) == naive_occurrences(seq, pattern)

    def test_followers_match_naive(self):
        rng = random.Random(2)
        for _ in range(50):
            seq = [rng.randint(0, 4) for _ in range(rng.randint(2, 25))]
            sfm = SequenceFMIndex(seq)
            prefix_len = rng.randint(1, 3)
            pattern = seq[:prefix_len]
            rng_win = sfm.start()
            for t in pattern:
                rng_win = sfm.extend(rng_win, t)
            expected = {seq[i + len(pattern)]
                        for i in range(len(seq) - len(pattern))
                        if seq[i:i + len(pattern)] == pattern}
            assert sfm.followers(rng_win) == expected

    def test_extend_dead_end(self):
        sfm = SequenceFMIndex([2, 3])
        assert sfm.count(sfm.extend(sfm.start(), 9)) == 0


@pytest.fixture
def toy_automata(toy_index):
    return {s: build(s, toy_index) for s in STRATEGIES}


def tok(index: DocIdIndex, word: str) -> int:
    return index.vocab.id_of(word)


class TestTrie:
    def test_toy_walkthrough(self, toy_index):
        a = TrieAutomaton(toy_index)
        food, tech = tok(toy_index, "food"), tok(toy_index, "tech")
        apple, banana = tok(toy_index, "apple"), tok(toy_index, "banana")
        s = a.start()
        allowed, end_ok = a.allowed(s)
        assert allowed == {food, tech} and not end_ok
        s = a.step(s, food)
        allowed, end_ok = a.allowed(s)
        assert allowed == {apple, banana} and not end_ok
        s = a.step(s, apple)
        allowed, end_ok = a.allowed(s)
        assert allowed == set() and end_ok
        assert [r.doc_key for r in a.complete(s)] == ["d1"]

    def test_illegal_transition(self, toy_index):
        a = TrieAutomaton(toy_index)
        with pytest.raises(IllegalTransition):
            a.step(a.start(), tok(toy_index, "apple"))

    def test_not_terminal(self, toy_index):
        a = TrieAutomaton(toy_index)
        with pytest.raises(NotTerminal):
            a.complete(a.start())

    def test_invalid_state(self, toy_index):
        with pytest.raises(InvalidState):
            TrieAutomaton(toy_index).allowed(999)

    def test_language_is_exactly_the_records(self):
        rng = random.Random(3)
        for _ in range(20):
            index = random_record_index(rng, rng.randint(2, 15), 6)
            a = TrieAutomaton(index)
            accepted = enumerate_accepted(a, max_len=5)
            langs = {seq for seq, _ in accepted}
            assert langs == {r.tokens for r in index.records}
            for seq, docs in accepted:
                expected = sorted(r.doc_key for r in index.records
                                  if r.tokens == seq)
                assert sorted(r.doc_key for r in docs) == expected


class TestFmAutomaton:
    def test_suffix_entry(self, toy_index):
        # "apple" alone is a valid suffix of two identifiers.
        a = FmIndexAutomaton(toy_index)
        s = a.step(a.start(), tok(toy_index, "apple"))
        _, end_ok = a.allowed(s)
        assert end_ok
        assert sorted(r.doc_key for r in a.complete(s)) == ["d1", "d2"]

    def test_prefix_not_terminal(self, toy_index):
        a = FmIndexAutomaton(toy_index)
        food = tok(toy_index, "food")
        s = a.step(a.start(), food)
        allowed, end_ok = a.allowed(s)
        assert not end_ok
        assert allowed == {tok(toy_index, "apple"), tok(toy_index, "banana")}
        with pytest.raises(NotTerminal):
            a.complete(s)

    def test_empty_emission_never_terminal(self, toy_index):
        a = FmIndexAutomaton(toy_index)
        _, end_ok = a.allowed(a.start())
        assert not end_ok

    def test_reserved_tokens_rejected(self, toy_index):
        a = FmIndexAutomaton(toy_index)
        for t in (SEP, END):
            with pytest.raises(IllegalTransition):
                a.step(a.start(), t)

    def test_language_is_record_suffixes(self):
        rng = random.Random(4)
        for _ in range(15):
            index = random_record_index(rng, rng.randint(2, 10), 5,
                                        max_len=3)
            a = FmIndexAutomaton(index)
            accepted = enumerate_accepted(a, max_len=4)
            bodies = [r.tokens[:-1] for r in index.records]
            expected = {body[i:] + (END,)
                        for body in bodies for i in range(len(body))}
            assert {seq for seq, _ in accepted} == expected
            for seq, docs in accepted:
                suffix = seq[:-1]
                oracle = sorted(r.doc_key for r in index.records
                                if r.tokens[:-1][len(r.tokens) - 1 - len(suffix):]
                                == suffix)
                assert sorted(r.doc_key for r in docs) == oracle


class TestTermSet:
    def test_order_free(self, toy_index):
        a = TermSetAutomaton(toy_index)
        food, apple = tok(toy_index, "food"), tok(toy_index, "apple")
        for order in ([food, apple], [apple, food]):
            s = a.start()
            for t in order:
                s = a.step(s, t)
            _, end_ok = a.allowed(s)
            assert end_ok
            assert [r.doc_key for r in a.complete(s)] == ["d1"]

    def test_partial_set_not_terminal(self, toy_index):
        a = TermSetAutomaton(toy_index)
        s = a.step(a.start(), tok(toy_index, "food"))
        _, end_ok = a.allowed(s)
        assert not end_ok
        with pytest.raises(NotTerminal):
            a.complete(s)

    def test_multiset_counts_respected(self):
        index = make_index({"d1": "food-food-apple", "d2": "food-apple"})
        a = TermSetAutomaton(index)
        food, apple = tok(index, "food"), tok(index, "apple")
        s = a.step(a.step(a.start(), food), apple)
        allowed, end_ok = a.allowed(s)
        assert end_ok  # d2 is complete
        assert allowed == {food}  # only a second "food" can continue (d1)
        s = a.step(s, food)
        _, end_ok = a.allowed(s)
        assert end_ok
        assert [r.doc_key for r in a.complete(s)] == ["d1"]

    def test_exhausted_token_illegal(self, toy_index):
        a = TermSetAutomaton(toy_index)
        apple = tok(toy_index, "apple")
        s = a.step(a.start(), apple)
        with pytest.raises(IllegalTransition):
            a.step(s, apple)

    def test_all_permutations_accepted(self):
        rng = random.Random(5)
        for _ in range(10):
            index = random_record_index(rng, rng.randint(2, 6), 5, max_len=4)
            a = TermSetAutomaton(index)
            for rec in index.records:
                body = rec.tokens[:-1]
                for perm in set(itertools.permutations(body)):
                    s = a.start()
                    for t in perm:
                        s = a.step(s, t)
                    _, end_ok = a.allowed(s)
                    assert end_ok
                    assert rec.doc_key in [r.doc_key for r in a.complete(s)]

    def test_accepted_multisets_are_sound(self):
        rng = random.Random(6)
        for _ in range(10):
            index = random_record_index(rng, rng.randint(2, 6), 4, max_len=3)
            a = TermSetAutomaton(index)
            record_multisets = [tuple(sorted(r.tokens[:-1]))
                                for r in index.records]
            for seq, docs in enumerate_accepted(a, max_len=3):
                ms = tuple(sorted(seq[:-1]))
                assert ms in record_multisets
                assert docs


class TestNoDeadEnds:
    """From every reachable state an accepting continuation exists."""

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_random_indices(self, strategy):
        rng = random.Random(7)
        for _ in range(10):
            index = random_record_index(rng, rng.randint(2, 8), 5, max_len=3)
            a = build(strategy, index)

            def reaches_end(state, depth):
                allowed, end_ok = a.allowed(state)
                if end_ok:
                    return True
                if depth == 0:
                    return False
                return any(reaches_end(a.step(state, t), depth - 1)
                           for t in allowed)

            stack = [(a.start(), 0)]
            while stack:
                state, depth = stack.pop()
                allowed, end_ok = a.allowed(state)
                assert end_ok or allowed
                assert reaches_end(state, 4 - depth)
                if depth < 4:
                    stack.extend((a.step(state, t), depth + 1)
                                 for t in allowed)


class TestBuild:
    def test_strategy_dispatch(self, toy_index):
        assert isinstance(build("trie", toy_index), TrieAutomaton)
        assert isinstance(build("fm_index", toy_index), FmIndexAutomaton)
        assert isinstance(build("term_set", toy_index), TermSetAutomaton)

    def test_empty_index(self):
        from gentrieval.corpus import Vocabulary
        with pytest.raises(EmptyIndex):
            build("trie", DocIdIndex([], Vocabulary()))

    def test_unknown_strategy(self, toy_index):
        with pytest.raises(ValueError):
            build("suffix-tree", toy_index)
