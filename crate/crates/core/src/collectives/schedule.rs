use crate::Rank;

/// `ceil(log2(n))` for `n >= 1`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1, "ceil_log2 of zero");
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Binomial communication pattern over an ordered participant list.
///
/// Round `t` holds the pairs `(i, i + 2^t)` for every `i < 2^t` with
/// `i + 2^t < n`, expressed as positions into `participants`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSchedule {
    pub participants: Vec<Rank>,
    pub rounds: Vec<Vec<(usize, usize)>>,
}

/// Broadcast schedule over positions `0..count`, rooted at position 0.
pub fn binomial_schedule(count: usize) -> TreeSchedule {
    TreeSchedule::over((0..count).collect())
}

impl TreeSchedule {
    pub fn over(participants: Vec<Rank>) -> Self {
        let n = participants.len();
        let rounds = if n <= 1 {
            Vec::new()
        } else {
            (0..ceil_log2(n))
                .map(|t| {
                    let step = 1usize << t;
                    (0..step).filter(|i| i + step < n).map(|i| (i, i + step)).collect()
                })
                .collect()
        };
        Self { participants, rounds }
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Rounds with positions replaced by ranks.
    pub fn rank_rounds(&self) -> Vec<Vec<(Rank, Rank)>> {
        self.rounds
            .iter()
            .map(|r| r.iter().map(|&(s, d)| (self.participants[s], self.participants[d])).collect())
            .collect()
    }

    /// The same tree with every edge reversed and rounds run backwards, for
    /// gathering toward position 0.
    pub fn reversed_rank_rounds(&self) -> Vec<Vec<(Rank, Rank)>> {
        self.rank_rounds()
            .into_iter()
            .rev()
            .map(|r| r.into_iter().map(|(s, d)| (d, s)).collect())
            .collect()
    }
}
