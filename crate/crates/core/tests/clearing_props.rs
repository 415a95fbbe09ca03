//! Clearing rules checked against a naive re-implementation.

use mt_core::auction::{clear_fcfs, clear_marginal_price, indicative_price, BidBook, TieBreak};
use mt_core::Money;
use proptest::prelude::*;

fn book(floor: i64, capacity: usize, amounts: &[i64]) -> BidBook {
    BidBook::from_amounts(Money::whole(floor), capacity, amounts.iter().map(|&a| Money::whole(a))).unwrap()
}

/// Price by full descending sort of eligible amounts.
fn oracle_price(floor: i64, capacity: usize, amounts: &[i64]) -> i64 {
    let mut eligible: Vec<i64> = amounts.iter().copied().filter(|&a| a >= floor).collect();
    eligible.sort_unstable_by(|a, b| b.cmp(a));
    if eligible.len() <= capacity {
        floor
    } else {
        eligible[capacity - 1]
    }
}

fn instance() -> impl Strategy<Value = (i64, usize, Vec<i64>)> {
    (0i64..30, 1usize..8, prop::collection::vec(0i64..40, 0..25))
}

fn tie_break() -> impl Strategy<Value = TieBreak> {
    prop_oneof![Just(TieBreak::Chronological), any::<u64>().prop_map(|seed| TieBreak::Lottery { seed })]
}

proptest! {
    #[test]
    fn price_matches_full_sort((floor, k, amounts) in instance(), tb in tie_break()) {
        let outcome = clear_marginal_price(&book(floor, k, &amounts), tb);
        prop_assert_eq!(outcome.price, Money::whole(oracle_price(floor, k, &amounts)));
        prop_assert!(outcome.price >= Money::whole(floor));
    }

    #[test]
    fn winner_count_and_bounds((floor, k, amounts) in instance(), tb in tie_break()) {
        let b = book(floor, k, &amounts);
        let eligible = amounts.iter().filter(|&&a| a >= floor).count();
        let mpa = clear_marginal_price(&b, tb);
        prop_assert_eq!(mpa.winners.len(), k.min(eligible));
        prop_assert_eq!(mpa.winners.len() + mpa.units_unsold, k);
        prop_assert!(mpa.winners.iter().all(|w| w.amount >= mpa.price));
        let mut seqs = mpa.winning_seqs();
        seqs.sort_unstable();
        seqs.dedup();
        prop_assert_eq!(seqs.len(), mpa.winners.len());

        let fcfs = clear_fcfs(&b);
        prop_assert_eq!(fcfs.winners.len(), k.min(eligible));
        prop_assert_eq!(fcfs.price, Money::whole(floor));
        prop_assert!(fcfs.winners.iter().all(|w| w.amount >= fcfs.price));
        // first eligible arrivals, in order
        let expected: Vec<u64> = amounts
            .iter()
            .enumerate()
            .filter(|(_, &a)| a >= floor)
            .map(|(i, _)| i as u64)
            .take(k)
            .collect();
        prop_assert_eq!(fcfs.winners.iter().map(|w| w.seq).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn permutation_invariance((floor, k, amounts) in instance(), shuffle_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut permuted = amounts.clone();
        permuted.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        let a = clear_marginal_price(&book(floor, k, &amounts), TieBreak::Chronological);
        let b = clear_marginal_price(&book(floor, k, &permuted), TieBreak::Chronological);
        prop_assert_eq!(a.price, b.price);
        prop_assert_eq!(a.units_unsold, b.units_unsold);
        let mut wa: Vec<Money> = a.winners.iter().map(|w| w.amount).collect();
        let mut wb: Vec<Money> = b.winners.iter().map(|w| w.amount).collect();
        wa.sort();
        wb.sort();
        prop_assert_eq!(wa, wb);
        let ties_at_margin = amounts.iter().filter(|&&x| Money::whole(x) == a.price).count();
        if ties_at_margin <= 1 {
            // no tie: the winning multiset of (amount) and identity of bids agree
            let set_a: std::collections::BTreeSet<i64> = a.winners.iter().map(|w| w.amount.cents()).collect();
            let set_b: std::collections::BTreeSet<i64> = b.winners.iter().map(|w| w.amount.cents()).collect();
            prop_assert_eq!(set_a, set_b);
        }
    }

    #[test]
    fn raising_a_loser_never_lowers_price((floor, k, amounts) in instance(), pick in any::<prop::sample::Index>(), bump in 1i64..20) {
        let b = book(floor, k, &amounts);
        let before = clear_marginal_price(&b, TieBreak::Chronological);
        let losers: Vec<usize> = (0..amounts.len())
            .filter(|&i| !before.winning_seqs().contains(&(i as u64)))
            .collect();
        if !losers.is_empty() {
            let i = losers[pick.index(losers.len())];
            let mut raised = amounts.clone();
            raised[i] = raised[i].max(before.price.cents() / 100) + bump;
            let after = clear_marginal_price(&book(floor, k, &raised), TieBreak::Chronological);
            prop_assert!(after.price >= before.price);
            prop_assert_eq!(after.price, Money::whole(oracle_price(floor, k, &raised)));
        }
    }

    #[test]
    fn lottery_is_reproducible((floor, k, amounts) in instance(), seed in any::<u64>()) {
        let b = book(floor, k, &amounts);
        let tb = TieBreak::Lottery { seed };
        prop_assert_eq!(clear_marginal_price(&b, tb), clear_marginal_price(&b, tb));
    }

    #[test]
    fn indicative_price_tracks_every_prefix((floor, k, amounts) in instance()) {
        for n in 0..=amounts.len() {
            let prefix = book(floor, k, &amounts[..n]);
            prop_assert_eq!(indicative_price(&prefix), Money::whole(oracle_price(floor, k, &amounts[..n])));
        }
    }
}

#[test]
fn lottery_picks_every_tied_bidder_sometimes() {
    // (30,25,25,25), K=2: the second unit goes to one of three tied bids
    let b = book(20, 2, &[30, 25, 25, 25]);
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..200 {
        let outcome = clear_marginal_price(&b, TieBreak::Lottery { seed });
        assert_eq!(outcome.price, Money::whole(25));
        assert!(outcome.winning_seqs().contains(&0));
        seen.extend(outcome.winning_seqs().into_iter().filter(|&s| s != 0));
    }
    assert_eq!(seen, [1, 2, 3].into_iter().collect());
}
