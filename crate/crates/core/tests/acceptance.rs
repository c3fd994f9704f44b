//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use contextuality_core::catalog::{self, RandomSpec};
use contextuality_core::coupling::search_reduced_coupling;
use contextuality_core::hvm::{self, empirical};
use contextuality_core::oracle::{self, fine_oracle};
use contextuality_core::pmf::Pmf;
use contextuality_core::rational::{format_rational, rat};
use contextuality_core::{
    build_bell, build_gen, cbd_analyze, check_connectedness, consistify, exhaustive_pair_max, find_reduced_coupling,
    max_equal_prob, to_cim_no_fc, to_fc_no_cim, verify_consistified, verify_witness, ConsistifyOutcome, System,
};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random systems for the unfalsifiability and equivalence criteria.
const UNFALSIFIABILITY_RANDOM: u64 = 100;
/// Random dichotomous systems for the Bell-criterion and consistification
/// checks; every fourth one is CHSH-shaped.
const DICHOTOMOUS_RANDOM: u64 = 200;
const PAIR_SAMPLES: u64 = 500;
const SAMPLE_SIZE: u64 = 100_000;
const SAMPLE_LINF: f64 = 0.02;
const SAMPLE_SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

/// Catalog fixtures plus seed-pinned random systems of several kinds:
/// dichotomous, ternary-alphabet, and CHSH-shaped.
fn unfalsifiability_inputs() -> Vec<(String, System)> {
    let mut out = catalog::fixtures();
    let ternary = RandomSpec { alphabet: (2, 3), max_variables: 6, ..RandomSpec::dichotomous() };
    for seed in 0..UNFALSIFIABILITY_RANDOM {
        let system = match seed % 5 {
            0..=2 => catalog::random_system(seed, &RandomSpec::dichotomous()),
            3 => catalog::random_system(seed, &ternary),
            _ => catalog::random_chsh(seed),
        };
        out.push((format!("random#{seed}"), system));
    }
    out
}

fn dichotomous_inputs() -> Vec<(String, System)> {
    let mut out = catalog::fixtures();
    for seed in 0..DICHOTOMOUS_RANDOM {
        let system = if seed % 4 == 0 {
            catalog::random_chsh(1_000 + seed)
        } else {
            catalog::random_system(1_000 + seed, &RandomSpec::dichotomous())
        };
        out.push((format!("dichotomous#{seed}"), system));
    }
    out
}

fn criterion_1() -> Outcome {
    let inputs = unfalsifiability_inputs();
    let mut signaling = 0;
    let mut contextual = 0;
    for (name, s) in &inputs {
        if !check_connectedness(s).consistent {
            signaling += 1;
        }
        if cbd_analyze(s).contextual {
            contextual += 1;
        }
        let gen = build_gen(s);
        let cim = to_cim_no_fc(&gen);
        let fc = to_fc_no_cim(&cim).map_err(|e| format!("{name}: {e}"))?;
        for (label, w) in [("gen", &gen), ("cim", &cim), ("fc", &fc)] {
            for c in s.context_ids() {
                let push = w.pushforward(c).map_err(|e| format!("{name}/{label}: {e}"))?;
                ensure(push == s.context(c).pmf, || {
                    format!("{name}/{label}: pushforward differs in context {}", s.context(c).id)
                })?;
            }
        }
    }
    ensure(signaling > 0 && contextual > 0, || "inputs lack signaling or contextual systems".into())?;
    Ok(format!("{} systems ({signaling} signaling, {contextual} contextual), 3 witnesses each, exact", inputs.len()))
}

fn criterion_2() -> Outcome {
    let inputs = unfalsifiability_inputs();
    for (name, s) in &inputs {
        let gen = build_gen(s);
        let cim = to_cim_no_fc(&gen);
        let fc = to_fc_no_cim(&cim).map_err(|e| format!("{name}: {e}"))?;
        let fc_direct = to_fc_no_cim(&gen).map_err(|e| format!("{name}: {e}"))?;
        for (label, w) in [("gen", &gen), ("cim", &cim), ("fc", &fc), ("fc<-gen", &fc_direct)] {
            let report = verify_witness(w, s).map_err(|e| format!("{name}/{label}: {e}"))?;
            ensure(report.passed(), || format!("{name}/{label}: {:?}", report.failures().collect::<Vec<_>>()))?;
        }
        ensure(!cim.uses_context_in_response(), || format!("{name}: CimNoFc response reads context"))?;
        ensure(!fc.hidden_dist_context_dependent(), || format!("{name}: FcNoCim hidden pmf varies"))?;
        ensure(!fc_direct.hidden_dist_context_dependent(), || format!("{name}: FcNoCim hidden pmf varies"))?;
    }
    Ok(format!("{} systems: gen -> cim -> fc verified, class flags as declared", inputs.len()))
}

fn criterion_3() -> Outcome {
    let inputs = dichotomous_inputs();
    let mut with_coupling = 0;
    for (name, s) in &inputs {
        let reduced = find_reduced_coupling(s).is_some();
        let bell = build_bell(s);
        let fine = fine_oracle(s).map_err(|e| format!("{name}: {e}"))?;
        ensure(bell.is_some() == reduced && fine.is_some() == reduced, || {
            format!("{name}: reduced {reduced}, bell {}, fine {}", bell.is_some(), fine.is_some())
        })?;
        if let Some(w) = bell {
            with_coupling += 1;
            let report = verify_witness(&w, s).map_err(|e| e.to_string())?;
            ensure(report.passed(), || format!("{name}: Bell witness fails verification"))?;
        }
        if let Some(f) = fine {
            ensure(f.reproduces(s), || format!("{name}: Fine mixture does not reproduce the bunches"))?;
        }
    }
    Ok(format!("{} systems ({with_coupling} with reduced coupling), 0 disagreements", inputs.len()))
}

fn criterion_4() -> Outcome {
    let pr = catalog::pr_box();
    let chsh_max = catalog::chsh([rat(1, 1), rat(1, 1), rat(1, 1), rat(-1, 1)]).map_err(|e| e.to_string())?;
    let chsh_bound = catalog::chsh([rat(1, 2), rat(1, 2), rat(1, 2), rat(-1, 2)]).map_err(|e| e.to_string())?;
    let mut measures = Vec::new();
    for (name, s, contextual) in [("pr-box", &pr, true), ("chsh(1,1,1,-1)", &chsh_max, true), ("chsh(1/2,1/2,1/2,-1/2)", &chsh_bound, false)] {
        let verdict = cbd_analyze(s);
        let reduced = find_reduced_coupling(s).is_some();
        let fine = fine_oracle(s).map_err(|e| e.to_string())?.is_some();
        ensure(verdict.contextual == contextual, || format!("{name}: CbD contextual = {}", verdict.contextual))?;
        ensure(verdict.measure.is_zero() != contextual, || format!("{name}: measure {}", verdict.measure))?;
        ensure(reduced != contextual && fine == reduced, || format!("{name}: reduced {reduced}, fine {fine}"))?;
        measures.push(format!("{name} measure {}", format_rational(&verdict.measure)));
    }
    Ok(measures.join(", "))
}

fn criterion_5() -> Outcome {
    let mut systems: Vec<(String, System)> = catalog::fixtures();
    let spec = RandomSpec::dichotomous();
    for seed in 0..100 {
        systems.push((format!("marginal#{seed}"), catalog::random_marginal_system(seed, &spec)));
        systems.push((format!("chsh#{seed}"), catalog::random_chsh(seed)));
    }
    let mut checked = 0;
    let mut contextual = 0;
    for (name, s) in systems.iter().filter(|(_, s)| check_connectedness(s).consistent) {
        checked += 1;
        let verdict = cbd_analyze(s);
        let reduced = find_reduced_coupling(s).is_some();
        ensure(verdict.measure.is_zero() == reduced, || {
            format!("{name}: measure {} but reduced coupling {reduced}", format_rational(&verdict.measure))
        })?;
        if !reduced {
            contextual += 1;
        }
    }
    ensure(contextual > 0 && contextual < checked, || "consistent inputs do not cover both verdicts".into())?;
    Ok(format!("{checked} consistent systems ({contextual} contextual): measure = 0 iff reduced coupling"))
}

fn criterion_6() -> Outcome {
    let r0 = catalog::r0_shape(0);
    let ConsistifyOutcome::Consistified(r) = consistify(&r0) else {
        return Err("r0 did not consistify".into());
    };
    let contexts: Vec<&str> = r.system.contexts().iter().map(|c| c.id.as_str()).collect();
    let contents: Vec<&str> = r.system.contents().iter().map(|c| c.id.as_str()).collect();
    ensure(contexts == ["ctx:1", "ctx:2", "ctx:3", "cnt:1", "cnt:2", "cnt:3", "cnt:4"], || format!("contexts {contexts:?}"))?;
    ensure(contents == ["1@1", "2@1", "3@1", "3@2", "4@2", "1@3", "2@3", "3@3", "4@3"], || format!("contents {contents:?}"))?;

    let inputs = dichotomous_inputs();
    let mut contextual = 0;
    for (name, s) in &inputs {
        let ConsistifyOutcome::Consistified(r) = consistify(s) else {
            return Err(format!("{name}: dichotomous system did not consistify"));
        };
        let check = verify_consistified(&r);
        ensure(check.passed(), || format!("{name}: {:?}", check.mismatches))?;
        ensure(r.system.contexts().len() == s.contexts().len() + s.contents().len(), || format!("{name}: |C†|"))?;
        ensure(r.system.contents().len() == s.incidence().len(), || format!("{name}: |Q†|"))?;
        let source = cbd_analyze(s).contextual;
        let dagger = find_reduced_coupling(&r.system).is_none();
        ensure(source == dagger, || format!("{name}: source contextual {source}, R† contextual {dagger}"))?;
        if source {
            contextual += 1;
        }
    }
    Ok(format!(
        "R0† has 7 contexts / 9 contents; {} systems strongly consistent after consistification, verdict preserved ({contextual} contextual)",
        inputs.len()
    ))
}

fn random_pmf_1d(rng: &mut ChaCha8Rng, n: usize) -> Pmf {
    let mut weights: Vec<i64> = (0..n).map(|_| rng.random_range(0..=6)).collect();
    if weights.iter().all(|&w| w == 0) {
        weights[rng.random_range(0..n)] = 1;
    }
    let total: i64 = weights.iter().sum();
    Pmf::new(vec![n], weights.iter().enumerate().map(|(i, &w)| (vec![i], rat(w, total)))).expect("valid pmf")
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..PAIR_SAMPLES {
        let n = rng.random_range(2..=6);
        let p = random_pmf_1d(&mut rng, n);
        let q = random_pmf_1d(&mut rng, n);
        let closed = max_equal_prob(&p, &q).map_err(|e| e.to_string())?;
        let lp = exhaustive_pair_max(&p, &q).map_err(|e| e.to_string())?;
        ensure(closed == lp, || format!("pair #{i}: sum-min {closed} vs LP {lp}"))?;
    }
    Ok(format!("{PAIR_SAMPLES} pairs, alphabets 2-6, exact equality"))
}

fn criterion_8() -> Outcome {
    // Bit-identical serialization under fixed seeds.
    for seed in [0, 1, 42] {
        for name in catalog::NAMES {
            let a = catalog::by_name(name, seed, None).map_err(|e| e.to_string())?;
            let b = catalog::by_name(name, seed, None).map_err(|e| e.to_string())?;
            ensure(a.to_json() == b.to_json(), || format!("{name}: catalog JSON differs"))?;
            ensure(build_gen(&a).to_json() == build_gen(&b).to_json(), || format!("{name}: witness JSON differs"))?;
            let cim_a = to_cim_no_fc(&build_gen(&a)).to_json();
            ensure(cim_a == to_cim_no_fc(&build_gen(&b)).to_json(), || format!("{name}: witness JSON differs"))?;
        }
        let a = catalog::random_system(seed, &RandomSpec::dichotomous());
        ensure(a.to_json() == catalog::random_system(seed, &RandomSpec::dichotomous()).to_json(), || {
            "random system JSON differs".into()
        })?;
    }

    // Certificates re-substitute exactly.
    let mut certificates = 0;
    for (name, s) in dichotomous_inputs() {
        let search = search_reduced_coupling(&s);
        search.solution.verify(&search.lp).map_err(|e| format!("{name}: reduced coupling: {e}"))?;
        let verdict = cbd_analyze(&s);
        verdict.solution.verify(&verdict.lp).map_err(|e| format!("{name}: CbD LP: {e}"))?;
        if let Some(r) = consistify(&s).consistified() {
            let dagger = search_reduced_coupling(&r.system);
            dagger.solution.verify(&dagger.lp).map_err(|e| format!("{name}: R† LP: {e}"))?;
            certificates += 1;
        }
        certificates += 2;
    }

    // Sampler agrees with exact pmfs and is reproducible.
    let pr = catalog::pr_box();
    let r0 = catalog::r0_shape(3);
    let fc = to_fc_no_cim(&build_gen(&r0)).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (system, witness, context) in [(&pr, build_gen(&pr), "11"), (&pr, build_gen(&pr), "22"), (&r0, fc.clone(), "3")] {
        let counts = hvm::sample(&witness, context, SAMPLE_SIZE, SAMPLE_SEED).map_err(|e| e.to_string())?;
        let again = hvm::sample(&witness, context, SAMPLE_SIZE, SAMPLE_SEED).map_err(|e| e.to_string())?;
        ensure(counts == again, || format!("context {context}: sampler not reproducible"))?;
        let c = system.find_context(context).map_err(|e| e.to_string())?;
        let distance = system.context(c).pmf.linf_distance_f64(&empirical(&counts));
        worst = worst.max(distance);
        ensure(distance <= SAMPLE_LINF, || format!("context {context}: L-inf {distance:.4}"))?;
    }
    Ok(format!(
        "JSON bit-identical; {certificates} LP certificates verified; sampler L-inf {worst:.4} <= {SAMPLE_LINF} at n={SAMPLE_SIZE}"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 unfalsifiability", criterion_1),
        ("2 equivalence of model classes", criterion_2),
        ("3 Bell criterion vs reduced coupling vs Fine", criterion_3),
        ("4 PR box and CHSH verdicts", criterion_4),
        ("5 reduction on consistent systems", criterion_5),
        ("6 consistification", criterion_6),
        ("7 pairwise maximum", criterion_7),
        ("8 determinism and exactness", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    // The combined oracle report must also pass on every fixture.
    for (name, s) in catalog::fixtures() {
        match oracle::cross_validate(&s) {
            Ok(report) if report.passed() => {}
            Ok(report) => {
                failed += 1;
                println!("FAIL cross-validation on {name}: {:?}", report.checks);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL cross-validation on {name}: {e}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
