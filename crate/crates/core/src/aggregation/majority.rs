use super::observations::ObservationMatrix;
use crate::corpus::{LabelSpace, Mode};

/// Per-position majority vote over latent states.
///
/// Every non-VOID symbol gives one vote to each latent state it is compatible
/// with, so an underspecified vote counts fully for all of its members.
/// Positions without votes get O (in classification mode, the first class in
/// name order). Otherwise the non-O state with most votes wins; ties go to
/// the state with more votes from concrete symbols, then to the
/// lexicographically smallest state name.
pub fn majority_vote(obs: &ObservationMatrix, space: &LabelSpace) -> Vec<usize> {
    let s_n = space.n_states();
    let first_candidate = match space.mode() {
        Mode::Sequence => 1,
        Mode::Classification => 0,
    };
    let names = space.state_names();
    let mut votes = vec![0usize; s_n];
    let mut concrete = vec![0usize; s_n];
    (0..obs.n_rows())
        .map(|i| {
            votes.fill(0);
            concrete.fill(0);
            let mut any = false;
            for &k in obs.row(i) {
                let k = k as usize;
                if k == 0 {
                    continue;
                }
                any = true;
                let is_concrete = space.symbol_label(k).is_some_and(|l| space.is_concrete(l));
                for s in first_candidate..s_n {
                    if space.compatible_idx(k, s) {
                        votes[s] += 1;
                        concrete[s] += usize::from(is_concrete);
                    }
                }
            }
            if !any && space.mode() == Mode::Sequence {
                return 0;
            }
            (first_candidate..s_n)
                .max_by(|&a, &b| {
                    votes[a]
                        .cmp(&votes[b])
                        .then(concrete[a].cmp(&concrete[b]))
                        .then(names[b].cmp(&names[a]))
                })
                .expect("at least one candidate state")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> LabelSpace {
        LabelSpace::sequence(&["PERSON", "ORG", "LOC"], &[("ENT", &["PERSON", "ORG", "LOC"])]).unwrap()
    }

    fn sym(space: &LabelSpace, name: &str) -> usize {
        space.symbol_names().iter().position(|n| n == name).unwrap()
    }

    fn state_name(space: &LabelSpace, s: usize) -> &str {
        &space.state_names()[s]
    }

    #[test]
    fn examples() {
        let sp = space();
        let bp = sym(&sp, "B-PERSON");
        let be = sym(&sp, "B-ENT");
        let obs = ObservationMatrix::from_rows(&[vec![bp, bp, 0], vec![be, bp, 0], vec![0, 0, 0], vec![be, 0, 0]]);
        let voted = majority_vote(&obs, &sp);
        assert_eq!(state_name(&sp, voted[0]), "B-PERSON");
        assert_eq!(state_name(&sp, voted[1]), "B-PERSON");
        assert_eq!(state_name(&sp, voted[2]), "O");
        // B-ENT alone: three-way tie, no concrete votes, smallest name wins
        assert_eq!(state_name(&sp, voted[3]), "B-LOC");
    }

    #[test]
    fn concrete_votes_break_ties() {
        let sp = space();
        let bo = sym(&sp, "B-ORG");
        let bl = sym(&sp, "B-LOC");
        let be = sym(&sp, "B-ENT");
        // ORG: 1 concrete + 1 ENT; LOC: 1 concrete + 1 ENT -> tie on both counts, LOC < ORG
        let obs = ObservationMatrix::from_rows(&[vec![bo, bl, be]]);
        assert_eq!(state_name(&sp, majority_vote(&obs, &sp)[0]), "B-LOC");
        // ORG twice concrete beats LOC + ENT
        let obs = ObservationMatrix::from_rows(&[vec![bo, bo, bl]]);
        assert_eq!(state_name(&sp, majority_vote(&obs, &sp)[0]), "B-ORG");
    }

    #[test]
    fn classification() {
        let sp = LabelSpace::classification(&["POS", "NEU", "NEG"], &[("NOT_POS", &["NEU", "NEG"])]).unwrap();
        let not_pos = sym(&sp, "NOT_POS");
        let neg = sym(&sp, "NEG");
        let obs = ObservationMatrix::from_rows(&[vec![not_pos, neg]]);
        assert_eq!(state_name(&sp, majority_vote(&obs, &sp)[0]), "NEG");
        let obs = ObservationMatrix::from_rows(&[vec![0, 0]]);
        assert_eq!(state_name(&sp, majority_vote(&obs, &sp)[0]), "NEG");
    }
}
