use std::sync::OnceLock;

use regex::Regex;

use crate::text::{cardinal_word, words};

struct Rule {
    re: Regex,
    render: fn(&regex::Captures, &str) -> String,
}

const RELATIONS: &str =
    "in front of|next to|left of|right of|on top of|above|below|under|near|behind|beside|on";

fn rules() -> &'static [Rule] {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    RULES.get_or_init(|| {
        let r = |p: &str| Regex::new(&p.replace("REL", RELATIONS)).unwrap();
        vec![
            Rule {
                re: r(r"^(?:what|which) colou?r (?:is|are) (?:the )?(.+)$"),
                render: |c, a| format!("the {} is {a}", &c[1]),
            },
            Rule {
                re: r(r"^what is the colou?r of (?:the )?(.+)$"),
                render: |c, a| format!("the {} is {a}", &c[1]),
            },
            Rule {
                re: r(r"^what colou?r does (?:the )?(.+) have$"),
                render: |c, a| format!("the {} is {a}", &c[1]),
            },
            Rule {
                re: r(r"^how many (.+?) (?:are|can)\b(.*)$"),
                render: |c, a| format!("{a} {}{}", &c[1], &c[2]),
            },
            Rule {
                re: r(r"^what is the number of (.+)$"),
                render: |c, a| format!("{a} {}", &c[1]),
            },
            Rule {
                re: r(r"^(?:what|which)(?: (?:type|kind) of)?(?: object| thing| furniture)? (?:is|can be found|is placed) (REL) (?:the )?(.+)$"),
                render: |c, a| format!("the {a} is {} the {}", &c[1], &c[2]),
            },
            Rule {
                re: r(r"^what is the object (REL) (?:the )?(.+)$"),
                render: |c, a| format!("the {a} is {} the {}", &c[1], &c[2]),
            },
            Rule {
                re: r(r"^(?:what|which object|what object) is (?:the )?(.+?) (?:located |positioned )?(REL)$"),
                render: |c, a| format!("the {} is {} the {a}", &c[1], &c[2]),
            },
            Rule {
                re: r(r"^the (.+) is (REL) what$"),
                render: |c, a| format!("the {} is {} the {a}", &c[1], &c[2]),
            },
            Rule {
                re: r(r"^where (?:is|are|can) (?:the )?(.+?)(?: located| placed| be found)?$"),
                render: |c, a| format!("the {} is {a}", &c[1]),
            },
            Rule {
                re: r(r"^in which part of the room is (?:the )?(.+)$"),
                render: |c, a| format!("the {} is {a}", &c[1]),
            },
        ]
    })
}

/// Words that only shape the question and carry no scene content.
const QUESTION_ONLY: &[&str] = &[
    "what", "which", "where", "how", "many", "color", "colour", "type", "kind", "number",
    "object", "thing", "furniture", "part", "located", "placed", "positioned", "found",
];

/// Rewrites a question/answer pair as a declarative sentence usable as an
/// NLI hypothesis, e.g. ("what color is the chair?", "brown") becomes
/// "the chair is brown". Numeric answers up to twenty are spelled out.
pub fn render_hypothesis(question: &str, answer: &str) -> String {
    let q = words(question).join(" ");
    let a = {
        let a = answer.trim().to_lowercase();
        match a.parse::<u32>() {
            Ok(n) => cardinal_word(n),
            Err(_) => a,
        }
    };
    let sentence = rules()
        .iter()
        .find_map(|rule| rule.re.captures(&q).map(|c| (rule.render)(&c, &a)))
        .unwrap_or_else(|| {
            let rest: Vec<&str> = q
                .split(' ')
                .filter(|w| !QUESTION_ONLY.contains(w))
                .collect();
            format!("{} {a}", rest.join(" "))
        });
    let mut s = format!(" {sentence} ");
    for filler in [" in the room ", " in the scene ", " you see ", " there "] {
        s = s.replace(filler, " ");
    }
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
