use proptest::prelude::*;
use seeker_core::planner::{
    parse_check_result, parse_position_inference, render_check_prompt, render_position_prompt, Verdict,
};

#[test]
fn rendered_prompts_match_golden_files() {
    let position = render_position_prompt("Refresh the file explorer").unwrap();
    assert_eq!(position, include_str!("golden/position_inference_refresh.txt"));
    let check = render_check_prompt("Refresh the file explorer").unwrap();
    assert_eq!(check, include_str!("golden/result_check_refresh.txt"));
}

#[test]
fn example_output_in_prompt_parses() {
    let prompt = render_position_prompt("x").unwrap();
    let line = prompt
        .lines()
        .skip_while(|l| *l != "Example Output:")
        .nth(1)
        .unwrap();
    let p = parse_position_inference(line);
    assert_eq!(p.elements, vec!["shortcut link"]);
    assert_eq!(p.areas, vec!["Settings window", "tools panel"]);
    assert_eq!(p.neighbors, vec!["Search button"]);
    assert!(!p.no_target && !p.malformed);
}

const WORDS: [&str; 10] = [
    "panel", "toolbar", "left", "blue", "Save", "icon", "menu", "status", "bar", "top",
];

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..4).prop_map(|w| w.join(" "))
}

fn prose() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["the", "likely", "in", "near", ",", "found", "\n", "is"]), 0..6)
        .prop_map(|w| w.join(" "))
}

fn unique(names: Vec<String>, tag: &str) -> Vec<String> {
    names.into_iter().enumerate().map(|(i, n)| format!("{} {} {}", n, tag, i)).collect()
}

proptest! {
    #[test]
    fn tagged_references_round_trip(
        elements in prop::collection::vec(phrase(), 0..3),
        areas in prop::collection::vec(phrase(), 1..5),
        neighbors in prop::collection::vec(phrase(), 0..4),
        gaps in prop::collection::vec(prose(), 12),
    ) {
        let elements = unique(elements, "element");
        let areas = unique(areas, "area");
        let neighbors = unique(neighbors, "neighbor");
        // Round-robin over the three kinds; order within a kind is kept.
        let lists = [
            elements.iter().map(|e| format!("<element>{}</element>", e)).collect::<Vec<_>>(),
            areas.iter().map(|e| format!("<area>{}</area>", e)).collect(),
            neighbors.iter().map(|e| format!("<neighbor>{}</neighbor>", e)).collect(),
        ];
        let mut tagged: Vec<&String> = Vec::new();
        for i in 0..5 {
            for l in &lists {
                tagged.extend(l.get(i));
            }
        }
        let mut text = String::new();
        for (i, t) in tagged.iter().enumerate() {
            text.push_str(&gaps[i % gaps.len()]);
            text.push(' ');
            text.push_str(t);
            text.push(' ');
        }
        let p = parse_position_inference(&text);
        prop_assert_eq!(p.elements, elements);
        prop_assert_eq!(p.areas, areas);
        prop_assert_eq!(p.neighbors, neighbors);
        prop_assert!(!p.no_target);
        prop_assert!(!p.malformed);
    }

    #[test]
    fn check_results_round_trip(
        verdict in prop::sample::select(vec![Verdict::IsTarget, Verdict::TargetElsewhere, Verdict::TargetNotFound]),
        rewrite in prop::option::of(phrase()),
        analysis in prose(),
    ) {
        let object = serde_json::json!({ "result": verdict, "new_instruction": rewrite });
        let text = format!("{}\n```json\n{}\n```", analysis, serde_json::to_string_pretty(&object).unwrap());
        let v = parse_check_result(&text).unwrap();
        prop_assert_eq!(v.result, verdict);
        prop_assert_eq!(v.new_instruction, rewrite);
    }
}
