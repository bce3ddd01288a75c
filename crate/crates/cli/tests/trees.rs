use czsob::check_tree_condition;
use czsob_cli::oracle::{brute_force, random_exact_tree};
use num_rational::Rational64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exponent() -> impl Strategy<Value = Rational64> {
    prop_oneof![Just(Rational64::new(3, 2)), Just(Rational64::from_integer(2)), Just(Rational64::from_integer(3)), Just(Rational64::new(5, 4))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_condition_matches_brute_force(seed in any::<u64>(), p in exponent(), size in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_exact_tree(&mut rng, size, p);
        let reference = brute_force(&prob).unwrap();
        for (v, (lhs, rhs)) in reference.into_iter().enumerate() {
            let r = check_tree_condition(&prob, v).unwrap();
            prop_assert_eq!(r.lhs, lhs);
            prop_assert_eq!(r.rhs, rhs);
        }
    }
}
