mod common;

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use evmlift_core::bridge::{
    self, build_prompt, build_prompt_within, count_tokens, mock_backend, truncate, validate, BackendConfig, Bridge,
    BridgeError, PromptContext, WireRequest,
};
use evmlift_core::keccak::selector;
use evmlift_core::tac::{self, TacFunction, TacOp, Visibility};
use rand::Rng;

use common::gen;
use common::server::{serve, Reply};

fn tac(text: &str) -> TacFunction {
    tac::parse(text).unwrap()
}

fn ctx(sig: Option<&str>, vis: Option<Visibility>) -> PromptContext {
    PromptContext {
        signature: sig.map(String::from),
        visibility: vis,
        selector: sig.map(selector),
    }
}

const PAPER_TAC: &str = "L0:\n  v0 = p0_0 + p0_1\n  v1 = p0_2 - p0_3\n  v2 = v0 * v1\n  mstore(0, v2)\n  stop\n";

#[test]
fn prompt_header_lines_in_fixed_order() {
    let p = build_prompt(&tac(PAPER_TAC), &ctx(Some("transfer(address,uint256)"), Some(Visibility::External))).unwrap();
    assert_eq!(
        p.text,
        format!(
            "signature: transfer(address,uint256)\nvisibility: external\nselector: 0xa9059cbb\n<|tac|>\n{PAPER_TAC}<|solidity|>\n"
        )
    );
    assert!(!p.truncated);
    assert_eq!(p.tac_token_count, count_tokens(PAPER_TAC));
    assert_eq!(p.tac_section(), PAPER_TAC);
}

#[test]
fn prompt_omits_unknown_header_lines() {
    let p = build_prompt(&tac(PAPER_TAC), &PromptContext::default()).unwrap();
    assert!(p.text.starts_with("<|tac|>\nL0:\n"));
    assert!(!p.text.contains("signature"));
    let p = build_prompt(&tac(PAPER_TAC), &ctx(None, Some(Visibility::Public))).unwrap();
    assert!(p.text.starts_with("visibility: public\n<|tac|>\n"));
}

#[test]
fn prompt_is_deterministic() {
    let c = ctx(Some("f(uint256)"), None);
    let a = build_prompt(&tac(PAPER_TAC), &c).unwrap();
    let b = build_prompt(&tac(PAPER_TAC), &c).unwrap();
    assert_eq!(a.text.as_bytes(), b.text.as_bytes());
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

/// Ten blocks. Each of the first nine costs 9 tokens
/// (`Lk :` / `vk = p0_0 + 1` / `jump Lk+1`), the last costs 8.
fn ten_blocks() -> TacFunction {
    let mut text = String::new();
    for k in 0..10 {
        text += &format!("L{k}:\n  v{k} = p0_0 + 1\n");
        if k < 9 {
            text += &format!("  jump L{}\n", k + 1);
        } else {
            text += "  stop\n";
        }
    }
    tac(&text)
}

#[test]
fn truncate_is_identity_within_budget() {
    let f = ten_blocks();
    assert_eq!(count_tokens(&tac::render(&f)), 89);
    assert_eq!(truncate(&f, 89).unwrap(), f);
    assert!(!build_prompt(&f, &PromptContext::default()).unwrap().truncated);
}

#[test]
fn truncate_keeps_whole_leading_blocks_and_marks_the_cut() {
    let f = ten_blocks();
    // four blocks plus the one-token sentinel
    let t = truncate(&f, 37).unwrap();
    assert_eq!(t.blocks.len(), 4);
    assert_eq!(t.blocks[0].label, "L0");
    let last = t.blocks.last().unwrap().instrs.last().unwrap();
    assert_eq!(last.op, TacOp::Truncated);
    let text = tac::render(&t);
    assert!(text.ends_with("  jump L4\n  truncated\n"));
    assert_eq!(count_tokens(&text), 37);
    assert_eq!(tac::parse(&text).unwrap(), t);
    assert_eq!(truncate(&f, 36).unwrap().blocks.len(), 3);
}

#[test]
fn entry_block_over_budget_is_an_error() {
    let f = ten_blocks();
    assert!(matches!(
        truncate(&f, 9),
        Err(BridgeError::EntryBlockExceedsBudget { tokens: 10, budget: 9, .. })
    ));
    assert_eq!(truncate(&f, 10).unwrap().blocks.len(), 1);
    assert!(matches!(
        build_prompt_within(&f, &PromptContext::default(), 15),
        Err(BridgeError::EntryBlockExceedsBudget { .. })
    ));
}

#[test]
fn prompt_budget_covers_the_whole_text() {
    let f = ten_blocks();
    let p = build_prompt_within(&f, &ctx(Some("f()"), None), 60).unwrap();
    assert!(p.truncated);
    assert!(count_tokens(&p.text) <= 60);
    assert_eq!(p.tac_token_count, count_tokens(p.tac_section()));
}

#[test]
fn truncate_respects_budget_on_synthetic_functions() {
    let mut rng = gen::rng(0xb0d6e7);
    for _ in 0..500 {
        let f = tac::normalize(&gen::synthetic_function(&mut rng));
        let total = count_tokens(&tac::render(&f));
        let budget = rng.gen_range(1..=total + 5);
        let entry_cost = count_tokens(&tac::render(&TacFunction { blocks: f.blocks[..1].to_vec(), ..f.clone() }));
        match truncate(&f, budget) {
            Ok(t) if total <= budget => assert_eq!(t, f),
            Ok(t) => {
                let text = tac::render(&t);
                assert!(count_tokens(&text) <= budget);
                let mut kept = f.blocks[..t.blocks.len()].to_vec();
                let last = kept.last_mut().unwrap();
                last.instrs.push(tac::TacInstruction::new(None, TacOp::Truncated, vec![]));
                last.refresh_successors();
                assert_eq!(t.blocks, kept);
                assert_eq!(tac::parse(&text).unwrap(), t.body_only());
            }
            Err(BridgeError::EntryBlockExceedsBudget { .. }) => assert!(entry_cost + 1 > budget),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn mock_prints_paper_example_as_three_assignments() {
    let p = build_prompt(&tac(PAPER_TAC), &PromptContext::default()).unwrap();
    let out = mock_backend(&p);
    let assigns: Vec<&str> = out.lines().map(str::trim).filter(|l| l.starts_with("uint256 ")).collect();
    assert_eq!(assigns, ["uint256 v0 = p0_0 + p0_1;", "uint256 v1 = p0_2 - p0_3;", "uint256 v2 = v0 * v1;"]);
    assert!(validate(&out).is_empty(), "{out}");
    assert_eq!(out, mock_backend(&p));
}

#[test]
fn mock_names_unknown_functions_by_selector() {
    let empty = TacFunction {
        selector: None,
        signature: None,
        visibility: None,
        blocks: vec![tac::TacBlock::new("L0", vec![])],
        entry_label: "L0".into(),
    };
    let c = PromptContext { selector: Some(selector("transfer(address,uint256)")), ..PromptContext::default() };
    let out = mock_backend(&build_prompt(&empty, &c).unwrap());
    assert_eq!(out, "function f_a9059cbb() public { }\n");
    assert!(validate(&out).is_empty());
    let out = mock_backend(&build_prompt(&empty, &PromptContext::default()).unwrap());
    assert_eq!(out, "fallback() external { }\n");
}

fn wallet_of_owner() -> (TacFunction, PromptContext) {
    let a = common::fixture("nft.sol", false).analyze();
    let sig = "walletOfOwner(address)";
    let cand = a
        .dispatch
        .unwrap()
        .candidates
        .into_iter()
        .find(|c| c.selector == Some(selector(sig)))
        .unwrap();
    let f = tac::lift_normalized(&a.cfg, &cand).unwrap();
    (f, ctx(Some(sig), Some(Visibility::Public)))
}

#[test]
fn mock_decompiles_wallet_of_owner() {
    let (f, c) = wallet_of_owner();
    let d = bridge::decompile(&f, &c, &BackendConfig::mock()).unwrap();
    assert!(d.solidity.starts_with("function walletOfOwner(address arg0) public {\n"));
    assert!(d.syntax_ok, "{:?}", d.warnings);
    assert!(d.warnings.is_empty());
    assert_eq!(d.backend_id, "mock");
    let again = bridge::decompile(&f, &c, &BackendConfig::mock()).unwrap();
    assert_eq!(d, again);
}

#[test]
fn mock_output_validates_on_every_fixture_function() {
    let bridge = Bridge::new(BackendConfig::mock()).unwrap();
    for fx in common::fixtures() {
        let a = fx.analyze();
        for cand in &a.dispatch.as_ref().unwrap().candidates {
            let f = tac::lift_normalized(&a.cfg, cand).unwrap();
            let c = PromptContext { selector: cand.selector, ..PromptContext::default() };
            let d = bridge.decompile(&f, &c).unwrap();
            assert!(d.syntax_ok, "{} {:?}: {:?}", fx.file, cand.selector, d.warnings);
        }
    }
}

#[test]
fn validator_accepts_fixture_sources() {
    for fx in common::fixtures() {
        assert_eq!(validate(&fx.source()), Vec::<String>::new(), "{}", fx.file);
        let broken = fx.source().replacen('}', "", 1);
        assert!(!validate(&broken).is_empty(), "{}", fx.file);
    }
}

// ---- wire protocol against a local fake server ----

fn http_config(url: &str) -> BackendConfig {
    BackendConfig {
        endpoint: url.into(),
        timeout: 5.0,
        retries: 0,
        backoff_ms: 10,
        ..BackendConfig::default()
    }
}

const GOOD: &str = r#"{"solidity":"function f() public { }<|end|>","model_id":"fake-1","prompt_tokens":12,"completion_tokens":7}"#;

#[test]
fn sends_wire_request_and_reads_response() {
    let (url, seen) = serve(|_, _, _| Reply::ok(GOOD));
    let cfg = BackendConfig { max_new_tokens: 99, ..http_config(&url) };
    let f = tac(PAPER_TAC);
    let c = ctx(Some("f()"), None);
    let d = bridge::decompile(&f, &c, &cfg).unwrap();
    assert_eq!(d.solidity, "function f() public { }\n");
    assert!(d.syntax_ok);
    assert_eq!(d.backend_id, "fake-1");
    assert_eq!(d.prompt_hash, build_prompt(&f, &c).unwrap().hash());
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].0, "POST /v1/decompile");
    let req: WireRequest = serde_json::from_str(&seen[0].1).unwrap();
    assert_eq!(req.prompt, build_prompt(&f, &c).unwrap().text);
    assert_eq!(req.max_new_tokens, 99);
    assert_eq!(req.temperature, 0.0);
    assert_eq!(req.stop, ["<|end|>"]);
    let raw: serde_json::Value = serde_json::from_str(&seen[0].1).unwrap();
    let mut keys: Vec<&String> = raw.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(keys, ["max_new_tokens", "prompt", "stop", "temperature"]);
}

#[test]
fn validator_misses_become_warnings() {
    let (url, _) = serve(|_, _, _| {
        Reply::ok(r#"{"solidity":"uint x = (1;","model_id":"m","prompt_tokens":1,"completion_tokens":1}"#)
    });
    let d = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &http_config(&url)).unwrap();
    assert!(!d.syntax_ok);
    assert_eq!(d.warnings.len(), 2, "{:?}", d.warnings);
}

#[test]
fn nothing_listening_is_unreachable() {
    let cfg = http_config("http://127.0.0.1:1");
    let err = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::BackendUnreachable { attempts: 1, .. }), "{err}");
    let cfg = BackendConfig { retries: 2, ..cfg };
    let err = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::BackendUnreachable { attempts: 3, .. }), "{err}");
}

#[test]
fn non_conforming_body_is_malformed() {
    for body in ["not json", r#"{"solidity":"x"}"#, r#"{"solidity":1,"model_id":"m","prompt_tokens":1,"completion_tokens":1}"#] {
        let (url, _) = serve(move |_, _, _| Reply::ok(body));
        let err = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &http_config(&url)).unwrap_err();
        assert!(matches!(err, BridgeError::BackendMalformedResponse(_)), "{body}: {err}");
    }
}

#[test]
fn bad_request_is_rejected_without_retry() {
    let (url, seen) = serve(|_, _, _| Reply { status: 400, body: r#"{"error":"missing prompt"}"#.into(), delay: Duration::ZERO });
    let cfg = BackendConfig { retries: 3, ..http_config(&url) };
    let err = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &cfg).unwrap_err();
    assert_eq!(err, BridgeError::BackendRejected { status: 400, message: "missing prompt".into() });
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn model_loading_is_retried() {
    let (url, seen) = serve(|i, _, _| if i < 2 { Reply { status: 503, body: "{}".into(), delay: Duration::ZERO } } else { Reply::ok(GOOD) });
    let cfg = BackendConfig { retries: 2, ..http_config(&url) };
    let d = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &cfg).unwrap();
    assert_eq!(d.backend_id, "fake-1");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn slow_backend_times_out() {
    let (url, _) = serve(|_, _, _| Reply { status: 200, body: GOOD.into(), delay: Duration::from_millis(1500) });
    let cfg = BackendConfig { timeout: 0.3, ..http_config(&url) };
    let err = bridge::decompile(&tac(PAPER_TAC), &PromptContext::default(), &cfg).unwrap_err();
    assert!(matches!(err, BridgeError::Timeout { .. }), "{err}");
}

#[test]
fn ranking_prefers_valid_then_plausible_length() {
    let (url, _) = serve(|_, _, body| {
        let sol = if body.contains("signature: bad()") {
            "function bad() public {".to_string()
        } else if body.contains("signature: long()") {
            format!("function long() public {{ {} }}", "x = 1; ".repeat(300))
        } else {
            "function good() public { y = 2; }".to_string()
        };
        Reply::ok(&serde_json::json!({"solidity": sol, "model_id": "m", "prompt_tokens": 1, "completion_tokens": 1}).to_string())
    });
    let b = Bridge::new(http_config(&url)).unwrap();
    let sigs = ["bad()", "long()", "good()"].map(String::from);
    let ranked = b.decompile_ranked(&tac(PAPER_TAC), &PromptContext::default(), &sigs).unwrap();
    let order: Vec<&str> = ranked.iter().map(|(s, _)| s.as_str()).collect();
    assert_eq!(order, ["good()", "long()", "bad()"]);
    assert!(!ranked[2].1.syntax_ok);
}

#[test]
fn bridge_is_shared_across_threads() {
    let (url, seen) = serve(|_, _, _| Reply::ok(GOOD));
    let b = Arc::new(Bridge::new(http_config(&url)).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let b = Arc::clone(&b);
            thread::spawn(move || {
                let c = ctx(Some(&format!("f{i}()")), None);
                b.decompile(&tac(PAPER_TAC), &c).unwrap()
            })
        })
        .collect();
    for h in handles {
        assert!(h.join().unwrap().syntax_ok);
    }
    assert_eq!(seen.lock().unwrap().len(), 8);
}
