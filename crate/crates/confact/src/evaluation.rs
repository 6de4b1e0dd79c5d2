//! Scoring verdicts against gold answers and rendering experiment reports.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{ClaimRecord, GoldAnswer, Split};
use crate::error::{Error, Result};
use crate::generation::{Answer, ParsedAnswer, Strategy, Verdict};
use crate::ranking::RankingMode;

/// Confusion counts over {Yes, No}; `gold_pred` naming.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub yes_yes: usize,
    pub yes_no: usize,
    pub no_yes: usize,
    pub no_no: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.yes_yes + self.yes_no + self.no_yes + self.no_no
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.yes_yes + self.no_no) as f64 / self.total() as f64
    }

    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            return 0.0;
        }
        2.0 * tp as f64 / denom as f64
    }

    /// Unweighted mean of per-class F1 over Yes and No; a class never
    /// predicted (or absent) contributes F1 = 0.
    pub fn macro_f1(&self) -> f64 {
        let f1_yes = Self::f1(self.yes_yes, self.no_yes, self.yes_no);
        let f1_no = Self::f1(self.no_no, self.yes_no, self.no_yes);
        (f1_yes + f1_no) / 2.0
    }
}

/// Metrics for one (split, strategy, provider, mode) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
    pub n_unparseable: usize,
}

/// Which background provider a run used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    None,
    Gt,
    Hybrid,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderKind::None => write!(f, "none"),
            ProviderKind::Gt => write!(f, "gt"),
            ProviderKind::Hybrid => write!(f, "hybrid"),
        }
    }
}

impl std::str::FromStr for ProviderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(ProviderKind::None),
            "gt" => Ok(ProviderKind::Gt),
            "hybrid" => Ok(ProviderKind::Hybrid),
            other => Err(Error::Config(format!("unknown provider `{other}`"))),
        }
    }
}

/// Report row key. Ordering gives the rendered report a stable row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CardKey {
    pub split: Split,
    pub strategy: Strategy,
    pub provider: ProviderKind,
    pub mode: RankingMode,
}

/// Score verdicts against the gold records they refer to.
///
/// Every verdict must resolve to a gold claim and no claim may be scored
/// twice. An Unparseable verdict counts as the wrong label: it lands in the
/// confusion cell opposite the gold answer and increments `n_unparseable`.
pub fn score(verdicts: &[Verdict], gold: &[ClaimRecord]) -> Result<ScoreCard> {
    if verdicts.is_empty() {
        return Err(Error::Evaluation("no verdicts to score".to_string()));
    }
    let gold_by_id: HashMap<&str, GoldAnswer> = gold
        .iter()
        .map(|r| (r.claim_id.as_str(), r.gold_answer))
        .collect();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut confusion = Confusion::default();
    let mut n_unparseable = 0usize;
    for verdict in verdicts {
        let gold_answer = *gold_by_id.get(verdict.claim_id.as_str()).ok_or_else(|| {
            Error::Evaluation(format!(
                "verdict for unknown claim_id `{}`",
                verdict.claim_id
            ))
        })?;
        if !seen.insert(verdict.claim_id.as_str()) {
            return Err(Error::Evaluation(format!(
                "duplicate verdict for claim_id `{}`",
                verdict.claim_id
            )));
        }
        let predicted = match verdict.answer {
            ParsedAnswer::Yes => Answer::Yes,
            ParsedAnswer::No => Answer::No,
            ParsedAnswer::Unparseable => {
                n_unparseable += 1;
                // Forced to the wrong label.
                match gold_answer {
                    GoldAnswer::Yes => Answer::No,
                    GoldAnswer::No => Answer::Yes,
                }
            }
        };
        match (gold_answer, predicted) {
            (GoldAnswer::Yes, Answer::Yes) => confusion.yes_yes += 1,
            (GoldAnswer::Yes, Answer::No) => confusion.yes_no += 1,
            (GoldAnswer::No, Answer::Yes) => confusion.no_yes += 1,
            (GoldAnswer::No, Answer::No) => confusion.no_no += 1,
        }
    }
    Ok(ScoreCard {
        n: verdicts.len(),
        accuracy: confusion.accuracy(),
        macro_f1: confusion.macro_f1(),
        confusion,
        n_unparseable,
    })
}

const REPORT_FOOTER: &str = "Scoring: accuracy is the exact-match rate against gold answers. \
Macro-F1 averages the per-class F1 of Yes and No, with F1 = 0 for a class that is never \
predicted correctly. An unparseable verdict is scored as the label opposite the gold answer \
(always wrong) and tallied in the Unparseable column.";

/// Render a deterministic markdown table over the cards.
///
/// Rows are sorted by key; reinserting cards in any order produces identical
/// bytes.
pub fn render_report(cards: &BTreeMap<CardKey, ScoreCard>) -> String {
    let mut out = String::new();
    out.push_str("# Results\n\n");
    out.push_str("| Split | Strategy | Provider | Mode | N | Accuracy | Macro-F1 | Unparseable |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    let mut any_unparseable = false;
    for (key, card) in cards {
        any_unparseable |= card.n_unparseable > 0;
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {:.4} | {:.4} | {} |\n",
            key.split,
            key.strategy,
            key.provider,
            key.mode,
            card.n,
            card.accuracy,
            card.macro_f1,
            card.n_unparseable
        ));
    }
    out.push('\n');
    out.push_str(REPORT_FOOTER);
    out.push('\n');
    if any_unparseable {
        out.push_str("\nNote: at least one cell produced unparseable answers; its accuracy and macro-F1 already count them as wrong.\n");
    }
    out
}

/// One machine-readable line per card, sorted by key.
pub fn cards_to_jsonl(cards: &BTreeMap<CardKey, ScoreCard>) -> Result<String> {
    #[derive(Serialize)]
    struct Line<'a> {
        split: Split,
        strategy: Strategy,
        provider: ProviderKind,
        mode: RankingMode,
        #[serde(flatten)]
        card: &'a ScoreCard,
    }
    let mut out = String::new();
    for (key, card) in cards {
        let line = Line {
            split: key.split,
            strategy: key.strategy,
            provider: key.provider,
            mode: key.mode,
            card,
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse a cards file written by [`cards_to_jsonl`].
pub fn cards_from_jsonl(text: &str) -> Result<BTreeMap<CardKey, ScoreCard>> {
    #[derive(Deserialize)]
    struct Line {
        split: Split,
        strategy: Strategy,
        provider: ProviderKind,
        mode: RankingMode,
        #[serde(flatten)]
        card: ScoreCard,
    }
    let mut cards = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?;
        cards.insert(
            CardKey {
                split: line.split,
                strategy: line.strategy,
                provider: line.provider,
                mode: line.mode,
            },
            line.card,
        );
    }
    Ok(cards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Origin;

    fn gold(n_yes: usize, n_no: usize) -> Vec<ClaimRecord> {
        (0..n_yes + n_no)
            .map(|i| ClaimRecord {
                claim_id: format!("c{i}"),
                claim: "x".to_string(),
                question: "x?".to_string(),
                claim_date: None,
                gold_answer: if i < n_yes { GoldAnswer::Yes } else { GoldAnswer::No },
                origin: Origin::Other,
                split: Split::HumC,
                documents: Vec::new(),
            })
            .collect()
    }

    fn verdict(claim_id: &str, answer: ParsedAnswer) -> Verdict {
        Verdict {
            claim_id: claim_id.to_string(),
            strategy: Strategy::DirA,
            answer,
            candidates: Vec::new(),
            raw_responses: Vec::new(),
            token_usage: None,
            note: None,
        }
    }

    #[test]
    fn all_no_predictor_on_humc_counts() {
        let gold = gold(51, 236);
        let verdicts: Vec<Verdict> = gold
            .iter()
            .map(|r| verdict(&r.claim_id, ParsedAnswer::No))
            .collect();
        let card = score(&verdicts, &gold).unwrap();
        assert_eq!(card.n, 287);
        assert!((card.accuracy - 0.8223).abs() < 1e-4);
        assert!((card.macro_f1 - 0.4512).abs() < 1e-4);
        assert_eq!(card.confusion.yes_no, 51);
        assert_eq!(card.confusion.no_no, 236);
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let gold = gold(3, 4);
        let verdicts: Vec<Verdict> = gold
            .iter()
            .map(|r| {
                verdict(
                    &r.claim_id,
                    match r.gold_answer {
                        GoldAnswer::Yes => ParsedAnswer::Yes,
                        GoldAnswer::No => ParsedAnswer::No,
                    },
                )
            })
            .collect();
        let card = score(&verdicts, &gold).unwrap();
        assert_eq!(card.accuracy, 1.0);
        assert_eq!(card.macro_f1, 1.0);
        assert_eq!(card.n_unparseable, 0);
    }

    #[test]
    fn unparseable_counts_as_wrong() {
        let gold = gold(1, 1);
        let verdicts = vec![
            verdict("c0", ParsedAnswer::Unparseable), // gold yes -> forced no
            verdict("c1", ParsedAnswer::No),
        ];
        let card = score(&verdicts, &gold).unwrap();
        assert_eq!(card.n_unparseable, 1);
        assert_eq!(card.confusion.yes_no, 1);
        assert!((card.accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn score_rejects_unknown_and_duplicate_claims() {
        let gold = gold(1, 1);
        assert!(score(&[verdict("ghost", ParsedAnswer::Yes)], &gold).is_err());
        let dup = vec![verdict("c0", ParsedAnswer::Yes), verdict("c0", ParsedAnswer::Yes)];
        assert!(score(&dup, &gold).is_err());
        assert!(score(&[], &gold).is_err());
    }

    #[test]
    fn score_is_permutation_invariant() {
        let gold = gold(2, 2);
        let mut verdicts = vec![
            verdict("c0", ParsedAnswer::Yes),
            verdict("c1", ParsedAnswer::No),
            verdict("c2", ParsedAnswer::No),
            verdict("c3", ParsedAnswer::Yes),
        ];
        let forward = score(&verdicts, &gold).unwrap();
        verdicts.reverse();
        let backward = score(&verdicts, &gold).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn accuracy_recomputes_from_confusion() {
        let gold = gold(5, 9);
        let verdicts: Vec<Verdict> = gold
            .iter()
            .enumerate()
            .map(|(i, r)| {
                verdict(
                    &r.claim_id,
                    if i % 3 == 0 { ParsedAnswer::Yes } else { ParsedAnswer::No },
                )
            })
            .collect();
        let card = score(&verdicts, &gold).unwrap();
        assert!((card.accuracy - card.confusion.accuracy()).abs() < 1e-12);
    }

    fn key(split: Split, strategy: Strategy) -> CardKey {
        CardKey {
            split,
            strategy,
            provider: ProviderKind::None,
            mode: RankingMode::RelevanceOnly,
        }
    }

    fn dummy_card(n_unparseable: usize) -> ScoreCard {
        ScoreCard {
            n: 2,
            accuracy: 0.5,
            macro_f1: 0.3333,
            confusion: Confusion { yes_yes: 1, yes_no: 1, no_yes: 0, no_no: 0 },
            n_unparseable,
        }
    }

    #[test]
    fn report_is_deterministic_under_insertion_order() {
        let mut a = BTreeMap::new();
        a.insert(key(Split::ModC, Strategy::DirA), dummy_card(0));
        a.insert(key(Split::HumC, Strategy::CoT), dummy_card(0));
        let mut b = BTreeMap::new();
        b.insert(key(Split::HumC, Strategy::CoT), dummy_card(0));
        b.insert(key(Split::ModC, Strategy::DirA), dummy_card(0));
        assert_eq!(render_report(&a), render_report(&b));
        assert_eq!(render_report(&a).matches("| modc |").count(), 1);
    }

    #[test]
    fn report_footnote_appears_only_with_unparseable() {
        let mut clean = BTreeMap::new();
        clean.insert(key(Split::ModC, Strategy::DirA), dummy_card(0));
        assert!(!render_report(&clean).contains("Note: at least one cell"));
        let mut tainted = BTreeMap::new();
        tainted.insert(key(Split::ModC, Strategy::DirA), dummy_card(1));
        assert!(render_report(&tainted).contains("Note: at least one cell"));
    }

    #[test]
    fn cards_round_trip_through_jsonl() {
        let mut cards = BTreeMap::new();
        cards.insert(key(Split::ModC, Strategy::DirA), dummy_card(1));
        cards.insert(key(Split::HumC, Strategy::SbaEns), dummy_card(0));
        let text = cards_to_jsonl(&cards).unwrap();
        assert_eq!(cards_from_jsonl(&text).unwrap(), cards);
    }
}
