mod support;

#[test]
fn market_steps_match_oracle() {
    support::market_steps_match_oracle();
}

#[test]
fn market_runs_match_oracle() {
    support::market_runs_match_oracle();
}

#[test]
fn selforg_steps_match_oracle() {
    support::selforg_steps_match_oracle();
}

#[test]
fn selforg_runs_match_oracle() {
    support::selforg_runs_match_oracle();
}
