//! Who may do what in the course management application.

use causal_ac::stats::{AppAction, PolicyFixture};

fn s(x: &str) -> String {
    x.to_string()
}

fn main() {
    let mut fx = PolicyFixture::new();
    let actors = ["admin", "asst1", "tut1", "tut2", "exm1", "s1", "s2", "s3", "nobody"];
    let actions = [
        ("view s1's profile", AppAction::ViewProfile { sid: s("s1") }),
        ("view ex1", AppAction::ViewExercise { ex: s("ex1") }),
        (
            "s1 points in g1",
            AppAction::ViewOwnResult {
                ex: s("ex1"),
                g: s("g1"),
                sid: s("s1"),
            },
        ),
        (
            "enter s1 points",
            AppAction::EnterPoints {
                ex: s("ex1"),
                g: s("g1"),
                sid: s("s1"),
                s: s("sheet1"),
                points: 7,
            },
        ),
        (
            "add tutor tut2 to g1",
            AppAction::AssignTutor {
                ex: s("ex1"),
                g: s("g1"),
                user: s("tut2"),
            },
        ),
        (
            "s3 registers for ex1",
            AppAction::RegisterForExercise {
                ex: s("ex1"),
                sid: s("s3"),
            },
        ),
        (
            "s1 exam result",
            AppAction::ViewExamResult {
                e: s("exam1"),
                sid: s("s1"),
            },
        ),
    ];

    print!("{:<22}", "");
    for a in actors {
        print!("{a:>7}");
    }
    println!();
    let print_table = |fx: &mut PolicyFixture| {
        for (label, action) in &actions {
            print!("{label:<22}");
            for actor in actors {
                print!("{:>7}", if fx.permits(actor, action.clone()) { "yes" } else { "-" });
            }
            println!();
        }
    };
    print_table(&mut fx);

    println!("\nregistration open, results published:");
    fx.set_exercise_registration(true);
    fx.set_published(true);
    print_table(&mut fx);
}
