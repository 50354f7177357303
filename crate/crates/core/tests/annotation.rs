use commentguard_core::annotation::{
    AnnotationError, AnnotationSession, CategoryScheme, Rater, RaterGroup, SessionEvent,
};
use commentguard_core::metrics::{fleiss_kappa, RatingMatrix};
use commentguard_core::{Comment, RawLabel};
use proptest::prelude::*;

fn rater(id: &str, group: RaterGroup) -> SessionEvent {
    SessionEvent::RegisterRater {
        ts: "t0".into(),
        rater: Rater {
            id: id.into(),
            group,
        },
    }
}

fn item(id: &str) -> SessionEvent {
    SessionEvent::AddItem {
        ts: "t0".into(),
        item: Comment::new(id, format!("comment {id}")).unwrap(),
    }
}

fn rate(r: &str, i: &str, label: RawLabel) -> SessionEvent {
    SessionEvent::Rate {
        ts: "t1".into(),
        rater: r.into(),
        item: i.into(),
        label,
        overwrite: false,
    }
}

#[test]
fn agreeing_group_outranks_split_group() {
    let mut events = vec![
        rater("e1", RaterGroup::Expert),
        rater("e2", RaterGroup::Expert),
        rater("e3", RaterGroup::Expert),
        rater("a1", RaterGroup::Amateur),
        rater("a2", RaterGroup::Amateur),
    ];
    let labels = [
        RawLabel::Genuine,
        RawLabel::Spam,
        RawLabel::Scam,
        RawLabel::Genuine,
    ];
    for (k, l) in labels.iter().enumerate() {
        let id = format!("c{k}");
        events.push(item(&id));
        for e in ["e1", "e2", "e3"] {
            events.push(rate(e, &id, *l));
        }
        events.push(rate("a1", &id, RawLabel::Genuine));
        events.push(rate("a2", &id, RawLabel::Scam));
    }
    let session = AnnotationSession::replay(&events).unwrap();
    let by_group = session.agreement_by_group();
    let expert = by_group[&RaterGroup::Expert].as_ref().unwrap();
    let amateur = by_group[&RaterGroup::Amateur].as_ref().unwrap();
    assert_eq!(expert.kappa_three_way, 1.0);
    assert_eq!(expert.kappa_binary, 1.0);
    // Every amateur row is (1,0,1): P = 0, Pe = 0.5, kappa = -1.
    let oracle = fleiss_kappa(&RatingMatrix::new(vec![vec![1, 0, 1]; 4]).unwrap()).unwrap();
    assert_eq!(oracle, -1.0);
    assert_eq!(amateur.kappa_three_way, oracle);
    assert!(expert.kappa_three_way > amateur.kappa_three_way);
    assert_eq!(amateur.items_used, 4);
}

#[test]
fn single_rater_group_is_rejected() {
    let events = [
        rater("e1", RaterGroup::Expert),
        item("c0"),
        rate("e1", "c0", RawLabel::Spam),
    ];
    let session = AnnotationSession::replay(&events).unwrap();
    assert_eq!(
        session.agreement_by_group()[&RaterGroup::Expert],
        Err(AnnotationError::TooFewRaters)
    );
}

#[test]
fn mixed_ratings_collapse_in_binary_scheme() {
    let events = [
        rater("r1", RaterGroup::Unspecified),
        rater("r2", RaterGroup::Unspecified),
        rater("r3", RaterGroup::Unspecified),
        item("a"),
        item("b"),
        rate("r1", "a", RawLabel::Genuine),
        rate("r2", "a", RawLabel::Spam),
        rate("r3", "a", RawLabel::Scam),
        rate("r1", "b", RawLabel::Genuine),
        rate("r2", "b", RawLabel::Genuine),
    ];
    let session = AnnotationSession::replay(&events).unwrap();
    let three = session.build_rating_matrix(CategoryScheme::Three).unwrap();
    let binary = session.build_rating_matrix(CategoryScheme::Binary).unwrap();
    assert_eq!(three.matrix.rows(), [vec![1, 1, 1]]);
    assert_eq!(binary.matrix.rows(), [vec![1, 2]]);
    assert_eq!(binary.excluded, ["b"]);
}

fn label_of(k: u8) -> RawLabel {
    RawLabel::ALL[k as usize % 3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn matrices_are_consistent(grid in prop::collection::vec(prop::collection::vec(prop::option::of(0u8..3), 2..6), 1..12)) {
        let raters = grid[0].len();
        let mut events: Vec<SessionEvent> =
            (0..raters).map(|r| rater(&format!("r{r}"), RaterGroup::Unspecified)).collect();
        for (i, row) in grid.iter().enumerate() {
            events.push(item(&format!("c{i}")));
            for (r, cell) in row.iter().take(raters).enumerate() {
                if let Some(k) = cell {
                    events.push(rate(&format!("r{r}"), &format!("c{i}"), label_of(*k)));
                }
            }
        }
        let session = AnnotationSession::replay(&events).unwrap();
        let fully_rated = grid.iter().filter(|row| row.len() >= raters && row[..raters].iter().all(Option::is_some)).count();
        match (session.build_rating_matrix(CategoryScheme::Three), session.build_rating_matrix(CategoryScheme::Binary)) {
            (Ok(three), Ok(binary)) => {
                prop_assert_eq!(three.item_ids.len(), fully_rated);
                prop_assert_eq!(three.item_ids.len() + three.excluded.len(), grid.len());
                for (t, b) in three.matrix.rows().iter().zip(binary.matrix.rows()) {
                    prop_assert_eq!(t.iter().sum::<u32>() as usize, raters);
                    prop_assert_eq!(b, &vec![t[0], t[1] + t[2]]);
                }
            }
            (Err(AnnotationError::NoFullyRatedItems), Err(AnnotationError::NoFullyRatedItems)) => {
                prop_assert_eq!(fully_rated, 0);
            }
            other => prop_assert!(false, "unexpected {:?}", other),
        }
        let replayed = AnnotationSession::replay(&events).unwrap();
        prop_assert_eq!(replayed, session);
    }
}
