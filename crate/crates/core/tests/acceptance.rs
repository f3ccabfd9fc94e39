use std::process::ExitCode;
use std::time::Instant;

use sdre::suite::{run, Suite, SuiteOptions};
use sdre::FamilyName;

const SAMPLES: usize = 20;
const SEEDS: [u64; 3] = [1, 2, 3];
/// The perturbed runs only need to show that each check can fail.
const PERTURB_SEED: u64 = 1;

#[derive(Clone, Copy)]
struct Case {
    suite: Suite,
    n: usize,
    family: Option<FamilyName>,
}

fn case(suite: Suite, n: usize) -> Case {
    Case { suite, n, family: None }
}

fn fam(suite: Suite, n: usize, family: FamilyName) -> Case {
    Case { suite, n, family: Some(family) }
}

fn options(c: &Case, seed: u64) -> SuiteOptions {
    let mut o = SuiteOptions::new(c.n, seed, SAMPLES);
    o.family = c.family;
    o
}

fn criteria() -> Vec<(&'static str, &'static str, Vec<Case>)> {
    use FamilyName::*;
    use Suite::*;
    let per_family = |s: Suite| {
        let mut v = vec![fam(s, 2, AcfConstant), fam(s, 3, AcfConstant), fam(s, 4, AcfConstant)];
        for n in 2..=3 {
            v.push(fam(s, n, AcfSpectral));
            v.push(fam(s, n, Hat));
        }
        v
    };
    let mut consistency = per_family(Consistency);
    consistency.extend(per_family(Gnf));
    let sdre = vec![
        fam(Sdre, 2, AcfConstant),
        fam(Sdre, 3, AcfConstant),
        fam(Sdre, 4, AcfConstant),
        fam(Sdre, 2, AcfSpectral),
        fam(Sdre, 3, AcfSpectral),
        fam(SdreSimplified, 2, AcfSpectral),
        fam(SdreSimplified, 3, AcfSpectral),
    ];
    let two_three = |ss: &[Suite]| ss.iter().flat_map(|&s| [case(s, 2), case(s, 3)]).collect::<Vec<_>>();
    let mut q = two_three(&[Rq, Rq0, QuasiNondyn, Limits]);
    q.extend([case(Rq, 4), case(Rq0, 4)]);
    vec![
        ("AC-1", "consistency system and GNF", consistency),
        ("AC-2", "reflection equation for the known solutions", sdre),
        ("AC-3", "rank profiles and n=2 collapses", vec![case(Rank, 2), case(Rank, 3), case(Rank, 4)]),
        ("AC-4", "simplification identities and rearrangement", two_three(&[Simplification])),
        ("AC-5", "twist parametrizations", two_three(&[Param])),
        ("AC-6", "Yang-Baxter equations, quasi-non-dynamical R, cocycle GNF", two_three(&[Ybe, ShiftedYbe, QuasiNondyn, Prop31])),
        ("AC-7", "Q exchange relations", q),
        ("AC-8", "ansatz solver certificates", two_three(&[Extension])),
        ("AC-9", "mixed Q and hat-family K", two_three(&[Closure])),
        ("AC-10", "commuting transfer traces and trace tricks", two_three(&[TraceCommute])),
    ]
}

fn label(c: &Case) -> String {
    match c.family {
        Some(f) => format!("{} {f} n={}", c.suite, c.n),
        None => format!("{} n={}", c.suite, c.n),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut all_ok = true;
    let mut every_case: Vec<Case> = Vec::new();
    for (id, title, cases) in criteria() {
        let t = Instant::now();
        let mut problems: Vec<String> = Vec::new();
        let mut reports = 0;
        for c in &cases {
            for seed in SEEDS {
                match run(c.suite, &options(c, seed)) {
                    Ok(r) => {
                        reports += r.reports.len();
                        if !r.pass {
                            let w = r.first_witness().unwrap_or_default();
                            problems.push(format!("{} seed={seed}: {w}", label(c)));
                        }
                    }
                    Err(e) => problems.push(format!("{} seed={seed}: error {e}", label(c))),
                }
            }
        }
        every_case.extend(cases.iter().copied());
        let ok = problems.is_empty();
        all_ok &= ok;
        println!(
            "{id} {} {title} ({reports} reports, {:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        for p in problems {
            println!("    {p}");
        }
    }

    let t = Instant::now();
    let mut vacuous: Vec<String> = Vec::new();
    let mut checked = 0;
    for c in &every_case {
        let o = options(c, PERTURB_SEED).perturbed();
        match run(c.suite, &o) {
            Ok(r) if r.pass => vacuous.push(format!("{} still passes when perturbed", label(c))),
            Ok(_) => checked += 1,
            Err(e) => vacuous.push(format!("{}: error {e}", label(c))),
        }
    }
    let ok = vacuous.is_empty();
    all_ok &= ok;
    println!(
        "AC-11 {} every suite fails under perturbation ({checked} suite runs, {:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        t.elapsed().as_secs_f64()
    );
    for v in vacuous {
        println!("    {v}");
    }
    println!("total {:.1}s", started.elapsed().as_secs_f64());
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
