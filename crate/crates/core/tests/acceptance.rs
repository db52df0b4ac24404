use dyadwave::verify::run_all;

#[test]
fn acceptance_criteria() {
    let outcomes = run_all(0).expect("fixtures build");
    for o in &outcomes {
        println!("{}", o.line());
        for f in &o.failures {
            println!("    {f}");
        }
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
