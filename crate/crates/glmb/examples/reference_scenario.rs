//! Prints the built-in reference scenario as JSON. The checked-in
//! `scenarios/reference.json` is produced by redirecting this output;
//! a test keeps the two in sync.

fn main() {
    println!("{}", glmb::scenario::ScenarioSpec::reference().to_json());
}
