use std::collections::BTreeSet;
use std::sync::Arc;

use crate::generator::Vocabulary;
use crate::model::{SystemBlock, UserBlock, Verdict};
use crate::provider::{complete, ChatProvider, ChatRequest, CostTable, RetryPolicy, RunLog};

use super::aggregate::{aggregate_mode, confidence_weighted_vote, CalibrationTable};
use super::prompt::{discussion_turn, render_prompt, PeerAnswer};
use super::shots::FewShotSet;
use super::verdict::{parse_verdict, ParseError};
use super::{
    JudgeError, JudgeFailure, JudgeOutcome, Persona, StrategyKind, StrategySpec, TranscriptEntry, Usage,
    FLAG_MISSING_CONFIDENCE, FLAG_PARSE_RETRY,
};

/// The pair a judge is asked about.
#[derive(Debug, Clone, Copy)]
pub struct JudgeInput<'a> {
    pub pair_id: &'a str,
    pub user: &'a UserBlock,
    pub system: &'a SystemBlock,
}

/// A configured strategy bound to its model(s).
///
/// Every strategy except the roundtable uses the first provider; persona
/// panels run all personas on it. The roundtable seats every provider.
pub struct Judge {
    spec: StrategySpec,
    panel: Vec<Arc<dyn ChatProvider>>,
    shots: Option<FewShotSet>,
    vocab: Vocabulary,
    costs: CostTable,
    retry: RetryPolicy,
    calibration: CalibrationTable,
}

impl std::fmt::Debug for Judge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let models: Vec<&str> = self.panel.iter().map(|p| p.model_id()).collect();
        f.debug_struct("Judge").field("spec", &self.spec).field("panel", &models).finish_non_exhaustive()
    }
}

impl Judge {
    pub fn new(
        spec: StrategySpec,
        panel: Vec<Arc<dyn ChatProvider>>,
        shots: Option<FewShotSet>,
        costs: CostTable,
    ) -> Result<Self, JudgeError> {
        let kind = spec.kind;
        spec.debate.validate(kind)?;
        if panel.is_empty() {
            return Err(JudgeError::InvalidConfig("no model configured".into()));
        }
        if kind == StrategyKind::ArCot5 {
            let ids: BTreeSet<&str> = panel.iter().map(|p| p.model_id()).collect();
            if panel.len() < 2 || ids.len() != panel.len() {
                return Err(JudgeError::InvalidConfig("the roundtable needs at least two distinct models".into()));
            }
        }
        if spec.temperature < 0.0 || !spec.temperature.is_finite() {
            return Err(JudgeError::InvalidConfig(format!("temperature {} is invalid", spec.temperature)));
        }
        let wanted = kind.shot_count();
        if wanted > 0 && shots.as_ref().is_none_or(|s| s.len() < wanted) {
            return Err(JudgeError::MissingAttachment(format!("{kind} requires {wanted} worked examples")));
        }
        for provider in &panel {
            costs.cost_of(provider.model_id(), 0, 0)?;
        }
        Ok(Self {
            spec,
            panel,
            shots,
            vocab: Vocabulary::default(),
            costs,
            retry: RetryPolicy::default(),
            calibration: CalibrationTable::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_vocabulary(mut self, vocab: Vocabulary) -> Self {
        self.vocab = vocab;
        self
    }

    pub fn with_calibration(mut self, calibration: CalibrationTable) -> Self {
        self.calibration = calibration;
        self
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.panel.iter().map(|p| p.model_id().to_string()).collect()
    }

    /// Runs the configured protocol on one pair.
    pub fn judge(&self, input: JudgeInput<'_>, log: Option<&RunLog>) -> Result<JudgeOutcome, JudgeFailure> {
        let mut run = Run { judge: self, input, log, transcript: Vec::new(), rounds_used: 0 };
        let result = match self.spec.kind {
            StrategyKind::Io | StrategyKind::Cot(_) => run.single(),
            StrategyKind::Sc(n) => run.self_consistency(n),
            StrategyKind::Mab | StrategyKind::Mad => run.persona_panel(),
            StrategyKind::ArCot5 => run.roundtable(),
        };
        let usage: Usage = run.transcript.iter().map(|e| e.usage.clone()).sum();
        match result {
            Ok(verdict) => Ok(JudgeOutcome { verdict, transcript: run.transcript, usage, rounds_used: run.rounds_used }),
            Err(error) => Err(JudgeFailure { error, transcript: run.transcript, usage, rounds_used: run.rounds_used }),
        }
    }
}

/// State of one judging run.
struct Run<'a> {
    judge: &'a Judge,
    input: JudgeInput<'a>,
    log: Option<&'a RunLog>,
    transcript: Vec<TranscriptEntry>,
    rounds_used: u32,
}

/// A participant's answer within a round.
struct Answer {
    content: String,
    verdict: Verdict,
}

impl Run<'_> {
    fn first_request(&self, provider: &dyn ChatProvider, persona: Option<&Persona>) -> Result<ChatRequest, JudgeError> {
        let j = self.judge;
        render_prompt(&j.spec, provider.model_id(), self.input.user, self.input.system, persona, j.shots.as_ref(), &j.vocab)
    }

    /// One logical call: retried while the reply does not parse.
    fn ask(&mut self, provider: &dyn ChatProvider, request: &ChatRequest, agent: &str, round: u32) -> Result<Answer, JudgeError> {
        let budget = self.judge.retry.max_attempts.max(1);
        let mut last = ParseError::NoJsonObject;
        for attempt in 1..=budget {
            let mut entry = TranscriptEntry {
                round,
                agent: agent.to_string(),
                model_id: provider.model_id().to_string(),
                messages: request.messages.clone(),
                response: None,
                verdict: None,
                error: None,
                usage: Usage::default(),
                attempts: 0,
                flags: if attempt > 1 { vec![FLAG_PARSE_RETRY.to_string()] } else { Vec::new() },
            };
            let completion = match complete(provider, request, &self.judge.retry, self.log, self.input.pair_id) {
                Ok(c) => c,
                Err(err) => {
                    entry.error = Some(err.to_string());
                    entry.attempts = self.judge.retry.max_attempts.max(1);
                    self.transcript.push(entry);
                    return Err(err.into());
                }
            };
            let response = completion.response;
            let cost = self.judge.costs.cost_of(provider.model_id(), response.input_tokens, response.output_tokens)?;
            entry.usage = Usage::of(&response, cost);
            entry.attempts = completion.attempts;
            entry.response = Some(response.content.clone());
            match parse_verdict(&response.content) {
                Ok(verdict) => {
                    if self.judge.spec.kind.elicits_confidence() && verdict.confidence.is_none() {
                        entry.flags.push(FLAG_MISSING_CONFIDENCE.to_string());
                    }
                    entry.verdict = Some(verdict.clone());
                    self.transcript.push(entry);
                    return Ok(Answer { content: response.content, verdict });
                }
                Err(err) => {
                    log::debug!("{}: unparseable reply from {agent} (attempt {attempt}): {err}", self.input.pair_id);
                    entry.error = Some(err.to_string());
                    self.transcript.push(entry);
                    last = err;
                }
            }
        }
        Err(JudgeError::Unparseable { agent: agent.to_string(), attempts: budget, last })
    }

    fn single(&mut self) -> Result<Verdict, JudgeError> {
        let provider = self.judge.panel[0].clone();
        let request = self.first_request(provider.as_ref(), None)?;
        self.rounds_used = 1;
        Ok(self.ask(provider.as_ref(), &request, provider.model_id(), 1)?.verdict)
    }

    fn self_consistency(&mut self, n: u8) -> Result<Verdict, JudgeError> {
        let provider = self.judge.panel[0].clone();
        let request = self.first_request(provider.as_ref(), None)?;
        self.rounds_used = 1;
        let mut samples = Vec::with_capacity(n as usize);
        for i in 1..=n {
            samples.push(self.ask(provider.as_ref(), &request, &format!("sample-{i}"), 1)?.verdict);
        }
        let decisions: Vec<bool> = samples.iter().map(|v| v.decision).collect();
        let decision = aggregate_mode(&decisions);
        let explanation = samples
            .iter()
            .find(|v| v.decision == decision)
            .map(|v| v.explanation.clone())
            .unwrap_or_default();
        Ok(Verdict { decision, explanation, confidence: None })
    }

    /// Personas (MAB, MAD) share one model; the roundtable seats one model per participant.
    fn persona_panel(&mut self) -> Result<Verdict, JudgeError> {
        let provider = self.judge.panel[0].clone();
        let seats: Vec<(String, Arc<dyn ChatProvider>, Option<Persona>)> = self
            .judge
            .spec
            .debate
            .personas
            .iter()
            .map(|p| (p.name.clone(), provider.clone(), Some(p.clone())))
            .collect();
        let max_rounds = if self.judge.spec.kind == StrategyKind::Mab { 1 } else { self.judge.spec.debate.max_rounds };
        let (answers, consensus) = self.debate(&seats, max_rounds)?;
        let decisions: Vec<bool> = answers.iter().map(|(_, a)| a.verdict.decision).collect();
        let decision = consensus.unwrap_or_else(|| aggregate_mode(&decisions));
        Ok(Verdict { decision, explanation: summarize(&answers), confidence: None })
    }

    fn roundtable(&mut self) -> Result<Verdict, JudgeError> {
        let seats: Vec<(String, Arc<dyn ChatProvider>, Option<Persona>)> =
            self.judge.panel.iter().map(|p| (p.model_id().to_string(), p.clone(), None)).collect();
        let (answers, consensus) = self.debate(&seats, self.judge.spec.debate.max_rounds)?;
        let votes: Vec<(bool, Option<f64>)> = answers.iter().map(|(_, a)| (a.verdict.decision, a.verdict.confidence)).collect();
        let (weighted, share) = confidence_weighted_vote(&votes, &self.judge.calibration);
        let decision = consensus.unwrap_or(weighted);
        let confidence = if consensus.is_some() { None } else { Some(share) };
        Ok(Verdict { decision, explanation: summarize(&answers), confidence })
    }

    /// Rounds until every participant agrees or `max_rounds` is reached.
    /// Returns the final round's answers and the consensus decision, if any.
    fn debate(
        &mut self,
        seats: &[(String, Arc<dyn ChatProvider>, Option<Persona>)],
        max_rounds: u32,
    ) -> Result<(Vec<(String, Answer)>, Option<bool>), JudgeError> {
        let mut histories = Vec::with_capacity(seats.len());
        let mut answers = Vec::with_capacity(seats.len());
        self.rounds_used = 1;
        for (name, provider, persona) in seats {
            let request = self.first_request(provider.as_ref(), persona.as_ref())?;
            answers.push((name.clone(), self.ask(provider.as_ref(), &request, name, 1)?));
            histories.push(request);
        }
        for round in 2..=max_rounds {
            if let Some(agreed) = consensus(&answers) {
                return Ok((answers, Some(agreed)));
            }
            self.rounds_used = round;
            let mut next = Vec::with_capacity(seats.len());
            for (i, (name, _, _)) in seats.iter().enumerate() {
                let peers: Vec<PeerAnswer<'_>> = answers
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, (peer, a))| PeerAnswer { name: peer, verdict: &a.verdict })
                    .collect();
                let request = discussion_turn(&histories[i], &answers[i].1.content, &peers, self.judge.spec.kind);
                next.push((name.clone(), request));
            }
            // round r+1 starts only once every round-r answer is in
            let mut round_answers = Vec::with_capacity(seats.len());
            for (i, (name, request)) in next.into_iter().enumerate() {
                let answer = self.ask(seats[i].1.as_ref(), &request, &name, round)?;
                histories[i] = request;
                round_answers.push((name, answer));
            }
            answers = round_answers;
        }
        let agreed = consensus(&answers);
        Ok((answers, agreed))
    }
}

fn consensus(answers: &[(String, Answer)]) -> Option<bool> {
    let first = answers.first()?.1.verdict.decision;
    answers.iter().all(|(_, a)| a.verdict.decision == first).then_some(first)
}

fn summarize(answers: &[(String, Answer)]) -> String {
    answers
        .iter()
        .map(|(name, a)| format!("{name}: {}", a.verdict.explanation))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fixtures::{aligned_venue, french_user};
    use crate::provider::{NoisyOracleMock, OracleMock, ScriptStep, ScriptedMock};
    use rust_decimal::Decimal;

    fn costs_for(ids: &[&str]) -> CostTable {
        let mut table = CostTable::reference();
        for id in ids {
            table.insert(*id, Decimal::ZERO, Decimal::ZERO);
        }
        table
    }

    fn judge(kind: StrategyKind, panel: Vec<Arc<dyn ChatProvider>>) -> Judge {
        let ids: Vec<String> = panel.iter().map(|p| p.model_id().to_string()).collect();
        let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
        let shots = (kind.shot_count() > 0).then(|| FewShotSet::default_set(5));
        Judge::new(StrategySpec::new(kind), panel, shots, costs_for(&ids)).unwrap().with_retry(RetryPolicy::immediate(3))
    }

    fn scripted(decisions: &[bool]) -> ScriptedMock {
        decisions.iter().fold(ScriptedMock::new("scripted"), |m, &d| m.then(ScriptStep::verdict(d)))
    }

    fn run(judge: &Judge) -> Result<JudgeOutcome, JudgeFailure> {
        let (user, system) = (french_user(), aligned_venue());
        judge.judge(JudgeInput { pair_id: "u000-correct", user: &user, system: &system }, None)
    }

    fn check_usage(outcome: &JudgeOutcome) {
        let summed: Usage = outcome.transcript.iter().map(|e| e.usage.clone()).sum();
        assert_eq!(summed, outcome.usage);
    }

    #[test]
    fn oracle_mock_on_every_strategy() {
        let mut time_error = aligned_venue();
        time_error.opening_hours.mon = vec![crate::model::Interval::new(720, 1200)];
        let user = french_user();
        for kind in StrategyKind::ALL {
            let panel: Vec<Arc<dyn ChatProvider>> = if kind == StrategyKind::ArCot5 {
                vec![Arc::new(OracleMock::new("oracle-a")), Arc::new(OracleMock::new("oracle-b")), Arc::new(OracleMock::new("oracle-c"))]
            } else {
                vec![Arc::new(OracleMock::new("oracle"))]
            };
            let j = judge(kind, panel);
            for (system, expected) in [(aligned_venue(), true), (time_error.clone(), false)] {
                let outcome = j.judge(JudgeInput { pair_id: "p", user: &user, system: &system }, None).unwrap();
                assert_eq!(outcome.verdict.decision, expected, "{kind}");
                assert_eq!(outcome.rounds_used, 1, "{kind}");
                check_usage(&outcome);
            }
        }
    }

    #[test]
    fn sc_mode_of_script() {
        let outcome = run(&judge(StrategyKind::Sc(3), vec![Arc::new(scripted(&[true, false, false]))])).unwrap();
        assert!(!outcome.verdict.decision);
        assert_eq!(outcome.usage.calls, 3);
        assert_eq!(outcome.rounds_used, 1);
    }

    #[test]
    fn sc_zero_noise_agrees() {
        let mock = NoisyOracleMock::new("noisy", 0.0, 1);
        let outcome = run(&judge(StrategyKind::Sc(3), vec![Arc::new(mock)])).unwrap();
        let decisions: Vec<bool> = outcome.transcript.iter().map(|e| e.verdict.as_ref().unwrap().decision).collect();
        assert_eq!(decisions, [true, true, true]);
        assert!(outcome.verdict.decision);
    }

    #[test]
    fn mab_mode_and_parse_retry() {
        let outcome = run(&judge(StrategyKind::Mab, vec![Arc::new(scripted(&[true, true, false]))])).unwrap();
        assert!(outcome.verdict.decision);
        assert_eq!(outcome.transcript.len(), 3);
        assert_eq!(outcome.transcript[2].agent, "Auditor");

        let mock = ScriptedMock::new("scripted")
            .then(ScriptStep::verdict(true))
            .then(ScriptStep::verdict(false))
            .then(ScriptStep::text("I think it is fine"))
            .then(ScriptStep::verdict(false));
        let outcome = run(&judge(StrategyKind::Mab, vec![Arc::new(mock)])).unwrap();
        assert!(!outcome.verdict.decision);
        assert_eq!(outcome.transcript.len(), 4);
        assert!(outcome.transcript[2].error.is_some());
        assert_eq!(outcome.transcript[3].flags, [FLAG_PARSE_RETRY]);
        assert_eq!(outcome.rounds_used, 1);
        check_usage(&outcome);
    }

    #[test]
    fn mab_personas_are_system_messages() {
        let outcome = run(&judge(StrategyKind::Mab, vec![Arc::new(scripted(&[true, true, true]))])).unwrap();
        for entry in &outcome.transcript {
            assert!(entry.messages[0].content.contains(&format!("You are the {}", entry.agent)));
        }
    }

    #[test]
    fn mad_consensus_in_second_round() {
        let outcome = run(&judge(StrategyKind::Mad, vec![Arc::new(scripted(&[true, false, true, true, true, true]))])).unwrap();
        assert!(outcome.verdict.decision);
        assert_eq!(outcome.rounds_used, 2);
        assert_eq!(outcome.usage.calls, 6);
        // round-2 requests carry the agent's own answer and a discussion turn
        let second = &outcome.transcript[3];
        assert_eq!(second.round, 2);
        assert!(second.messages.last().unwrap().content.contains("Forensic Examiner"));
    }

    #[test]
    fn mad_majority_after_last_round() {
        let script = [true, false, true, false, true, false, true, false, false];
        let outcome = run(&judge(StrategyKind::Mad, vec![Arc::new(scripted(&script))])).unwrap();
        assert!(!outcome.verdict.decision);
        assert_eq!(outcome.rounds_used, 3);
        assert_eq!(outcome.usage.calls, 9);
    }

    #[test]
    fn mad_first_round_consensus() {
        let outcome = run(&judge(StrategyKind::Mad, vec![Arc::new(scripted(&[false, false, false]))])).unwrap();
        assert_eq!(outcome.rounds_used, 1);
        assert!(!outcome.verdict.decision);
    }

    #[test]
    fn roundtable_weighted_vote() {
        let a = ScriptedMock::new("m-a").then(ScriptStep::verdict_with_confidence(true, 1.0)).then(ScriptStep::verdict_with_confidence(true, 1.0)).then(ScriptStep::verdict_with_confidence(true, 1.0));
        let b = ScriptedMock::new("m-b").then(ScriptStep::verdict_with_confidence(false, 0.9)).then(ScriptStep::verdict_with_confidence(false, 0.9)).then(ScriptStep::verdict_with_confidence(false, 0.9));
        let c = ScriptedMock::new("m-c").then(ScriptStep::verdict_with_confidence(false, 0.8)).then(ScriptStep::verdict_with_confidence(false, 0.8)).then(ScriptStep::verdict_with_confidence(false, 0.8));
        let outcome = run(&judge(StrategyKind::ArCot5, vec![Arc::new(a), Arc::new(b), Arc::new(c)])).unwrap();
        assert!(!outcome.verdict.decision);
        assert_eq!(outcome.rounds_used, 3);
        assert!((outcome.verdict.confidence.unwrap() - 1.3 / 2.3).abs() < 1e-12);
    }

    #[test]
    fn roundtable_missing_confidence_is_flagged() {
        let a = ScriptedMock::new("m-a").then(ScriptStep::verdict(true));
        let b = ScriptedMock::new("m-b").then(ScriptStep::verdict_with_confidence(true, 0.9));
        let outcome = run(&judge(StrategyKind::ArCot5, vec![Arc::new(a), Arc::new(b)])).unwrap();
        assert!(outcome.verdict.decision);
        assert_eq!(outcome.transcript[0].flags, [FLAG_MISSING_CONFIDENCE]);
        assert!(outcome.transcript[1].flags.is_empty());
    }

    #[test]
    fn roundtable_uses_final_round_confidences() {
        // round 1 split; round 2 the lone true voter gains certainty
        let a = ScriptedMock::new("m-a").then(ScriptStep::verdict_with_confidence(true, 0.5)).then(ScriptStep::verdict_with_confidence(true, 1.0));
        let b = ScriptedMock::new("m-b").then(ScriptStep::verdict_with_confidence(false, 0.95)).then(ScriptStep::verdict_with_confidence(false, 0.5));
        let mut j = judge(StrategyKind::ArCot5, vec![Arc::new(a), Arc::new(b)]);
        j.spec.debate.max_rounds = 2;
        let outcome = run(&j).unwrap();
        assert!(outcome.verdict.decision);
    }

    #[test]
    fn roundtable_needs_distinct_models() {
        let panel: Vec<Arc<dyn ChatProvider>> = vec![Arc::new(OracleMock::new("same")), Arc::new(OracleMock::new("same"))];
        let err = Judge::new(StrategySpec::new(StrategyKind::ArCot5), panel, Some(FewShotSet::default_set(5)), costs_for(&["same"]))
            .unwrap_err();
        assert!(matches!(err, JudgeError::InvalidConfig(_)));
    }

    #[test]
    fn missing_shots_and_unknown_costs() {
        let panel: Vec<Arc<dyn ChatProvider>> = vec![Arc::new(OracleMock::new("oracle"))];
        let err = Judge::new(StrategySpec::new(StrategyKind::Cot(3)), panel.clone(), None, costs_for(&["oracle"])).unwrap_err();
        assert!(matches!(err, JudgeError::MissingAttachment(_)));
        let err = Judge::new(StrategySpec::new(StrategyKind::Io), panel, None, CostTable::reference()).unwrap_err();
        assert!(matches!(err, JudgeError::Cost(_)));
    }

    #[test]
    fn exhausted_parse_retries_fail_with_transcript() {
        let mock = ScriptedMock::new("scripted").then(ScriptStep::text("hmm")).then(ScriptStep::text("hmm")).then(ScriptStep::text("hmm"));
        let failure = run(&judge(StrategyKind::Io, vec![Arc::new(mock)])).unwrap_err();
        assert!(matches!(failure.error, JudgeError::Unparseable { attempts: 3, .. }));
        assert_eq!(failure.transcript.len(), 3);
        assert_eq!(failure.usage.calls, 3);
    }

    #[test]
    fn provider_exhaustion_is_reported() {
        let mock = ScriptedMock::new("scripted").then(ScriptStep::fail(503)).then(ScriptStep::fail(503)).then(ScriptStep::fail(503));
        let failure = run(&judge(StrategyKind::Io, vec![Arc::new(mock)])).unwrap_err();
        assert!(matches!(failure.error, JudgeError::Provider(_)));
        assert_eq!(failure.usage.calls, 0);
    }

    #[test]
    fn usage_prices_tokens() {
        let mock = ScriptedMock::new("gpt-4-turbo").then(ScriptStep::reply(r#"{"decision": true}"#, 1000, 500));
        let j = Judge::new(StrategySpec::new(StrategyKind::Io), vec![Arc::new(mock)], None, CostTable::reference()).unwrap();
        let outcome = run(&j).unwrap();
        assert_eq!(outcome.usage.cost_usd, Decimal::new(25, 3));
    }

    #[test]
    fn noisy_mock_flips_labels_sometimes() {
        let user = french_user();
        let system = aligned_venue();
        let j = judge(StrategyKind::Io, vec![Arc::new(NoisyOracleMock::new("noisy", 1.0, 3))]);
        let outcome = j.judge(JudgeInput { pair_id: "p", user: &user, system: &system }, None).unwrap();
        assert!(!outcome.verdict.decision);
    }
}
