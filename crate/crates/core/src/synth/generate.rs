//! Cohort generator.
//!
//! Survival follows a logistic model,
//!
//! ```text
//! logit P(survive) = intercept + gp_effect * [GP on team] - comorbidity_effect * K + eps
//! ```
//!
//! with `K` the number of active comorbidities and `eps ~ N(0, 0.1^2)`.
//! Confounders (gender, stage, age, insurance) are drawn independently of
//! everything that enters the survival draw.
//!
//! `K` comes from a three-tier severity mix (healthy, typical, frail). With a
//! `class_skew` target the intercept places the typical tier on the decision
//! boundary (GP presence flips the likely outcome there) and the healthy/frail
//! weights are solved so that the expected survived fraction equals the target.
//! Without a target the intercept is `logit(survival_base_rate)`. Which
//! comorbidities are active is drawn with geometrically decaying weights, so
//! sicker patients accumulate the rarer conditions.
//!
//! Care teams: the cancer type's core oncology services, one GP with
//! probability [`GP_PARTICIPATION`], and for each active comorbidity a matching
//! specialist. Notes carry their writer's usual content category. Every team
//! member touches at least one note inside the observation window.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample_weighted;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};

use super::taxonomy::{
    proxy_specialties, proxy_specialty, CORE_SPECIALTIES, N_COMORBIDITIES, N_CONTENTS, N_INTENTS,
    N_SPECIALTIES, SPECIALTY_GENERAL_PRACTICE, TITLE_MD, TITLE_NP,
};
use super::{
    AccessLogEvent, Action, CancerStage, CancerType, Cohort, Gender, HcpProfile, Insurance,
    NoteProfile, PatientRecord, SynthConfig, LOG_END, LOG_START,
};
use crate::error::Result;
use crate::graph::TimeWindows;

pub const LOGIT_NOISE_SD: f64 = 0.1;
pub const GP_PARTICIPATION: f64 = 0.5;

/// Active comorbidity count of the healthy, typical and frail tiers.
const TIER_K: [usize; 3] = [1, 8, 18];
const TYPICAL_WEIGHT: f64 = 0.35;
/// Share of `gp_effect` by which a typical patient without a GP falls below the boundary.
const GP_SPLIT: f64 = 0.6;
const UNSKEWED_WEIGHTS: [f64; 3] = [0.5, 0.4, 0.1];

const WRITER_WEIGHT_BY_TITLE: [f64; 7] = [3.0, 2.0, 2.0, 3.0, 0.5, 1.0, 1.0];
const CORE_TITLE_WEIGHTS: [f64; 7] = [3.0, 1.5, 1.0, 3.0, 0.5, 1.0, 0.8];
const INTENT_WEIGHTS: [f64; N_INTENTS] = [3.0, 4.0, 2.0, 1.5, 1.0];
const INPATIENT_RATE: f64 = 0.3;
const INPATIENT_DAYS: f64 = 21.0;
const INTENT_FOLLOWS_TITLE: f64 = 0.8;
/// Usual intent of a note by its writer's title (orders, clinical information, ...).
const INTENT_BY_TITLE: [usize; 7] = [0, 0, 0, 1, 0, 2, 4];
/// GPs coordinate shared care and author proportionally more notes.
const GP_WRITER_BOOST: f64 = 4.0;
/// Comorbidity `c` is drawn with weight `COMORBIDITY_DECAY^c`.
const COMORBIDITY_DECAY: f64 = 0.3;

/// Content category of the notes a specialty writes.
fn specialty_content(specialty: usize) -> usize {
    if specialty < N_CONTENTS {
        specialty
    } else {
        13 + (specialty - N_CONTENTS) % (N_CONTENTS - 13)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-cancer-type survival intercept and severity-tier weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityPlan {
    pub intercept: f64,
    /// Healthy, typical, frail.
    pub weights: [f64; 3],
}

impl SeverityPlan {
    pub fn for_cancer(config: &SynthConfig, cancer: CancerType) -> SeverityPlan {
        match &config.class_skew {
            None => SeverityPlan {
                intercept: logit(config.survival_base_rate),
                weights: UNSKEWED_WEIGHTS,
            },
            Some(skew) => calibrate(config, skew.get(cancer)),
        }
    }

    /// Expected survived fraction, ignoring the small logit noise.
    pub fn expected_survival(&self, config: &SynthConfig) -> f64 {
        expected_survival(config, self.intercept, self.weights)
    }
}

fn expected_survival(config: &SynthConfig, intercept: f64, weights: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for (w, &k) in weights.iter().zip(TIER_K.iter()) {
        let base = intercept - config.comorbidity_effect * k as f64;
        let p = GP_PARTICIPATION * sigmoid(base + config.gp_effect)
            + (1.0 - GP_PARTICIPATION) * sigmoid(base);
        total += w * p;
    }
    total
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f increasing, root bracketed
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn calibrate(config: &SynthConfig, target: f64) -> SeverityPlan {
    let intercept =
        logit(target) + config.comorbidity_effect * TIER_K[1] as f64 - GP_SPLIT * config.gp_effect;
    let rest = 1.0 - TYPICAL_WEIGHT;
    let weights_for = |healthy: f64| [healthy, TYPICAL_WEIGHT, rest - healthy];
    let lo = expected_survival(config, intercept, weights_for(0.0));
    let hi = expected_survival(config, intercept, weights_for(rest));
    if lo <= target && target <= hi && hi - lo > 1e-9 {
        let healthy = bisect(0.0, rest, |h| {
            expected_survival(config, intercept, weights_for(h)) - target
        });
        return SeverityPlan {
            intercept,
            weights: weights_for(healthy),
        };
    }
    // Target out of reach by reweighting alone (e.g. no comorbidity effect):
    // keep a proportional mix and move the intercept instead.
    let weights = weights_for(rest * target);
    let intercept = bisect(-60.0, 60.0, |a| {
        expected_survival(config, a, weights) - target
    });
    SeverityPlan { intercept, weights }
}

/// Specialties on every core team of a cancer type: oncology, imaging,
/// pathology and nursing, plus the matching surgical service.
fn core_team_specialties(cancer: CancerType) -> &'static [usize] {
    match cancer {
        CancerType::Breast => &[3, 4, 6, 9, 10, 11],
        CancerType::Lung => &[3, 4, 7, 9, 10, 11],
        CancerType::Colorectal => &[3, 5, 8, 9, 10, 11],
    }
}

fn round_day(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn generate_pool(rng: &mut ChaCha8Rng, size: usize) -> Vec<HcpProfile> {
    #[derive(Clone, Copy)]
    enum Slot {
        Gp,
        Core(usize),
        Proxy(usize),
    }
    let mut slots = vec![Slot::Gp];
    slots.extend(CORE_SPECIALTIES.map(Slot::Core));
    slots.extend(proxy_specialties().into_iter().map(Slot::Proxy));
    for _ in 0..2 {
        slots.push(Slot::Gp);
        slots.extend(CORE_SPECIALTIES.map(Slot::Core));
    }
    slots.extend(CORE_SPECIALTIES.map(Slot::Core));

    let core_titles = WeightedIndex::new(CORE_TITLE_WEIGHTS).expect("static weights");
    (0..size)
        .map(|i| {
            let (specialty, title) = match slots[i % slots.len()] {
                Slot::Gp => (
                    SPECIALTY_GENERAL_PRACTICE,
                    if rng.random_bool(0.8) {
                        TITLE_MD
                    } else {
                        TITLE_NP
                    },
                ),
                Slot::Proxy(s) => (
                    s,
                    if rng.random_bool(0.85) {
                        TITLE_MD
                    } else {
                        TITLE_NP
                    },
                ),
                Slot::Core(s) => (s, core_titles.sample(rng)),
            };
            let hcp_type = match title {
                0 => [0, 0, 0, 0, 0, 0, 1, 1, 2, 2, 2][rng.random_range(0..11)],
                1 | 2 => 3,
                3 => [4, 4, 4, 4, 5, 5, 6, 11][rng.random_range(0..8)],
                4 => 8,
                5 => 7,
                _ => [9, 9, 10][rng.random_range(0..3)],
            };
            HcpProfile {
                hcp_id: format!("H{i:04}"),
                title,
                hcp_type,
                specialty,
                is_resident: hcp_type == 2,
            }
        })
        .collect()
}

struct PatientLog {
    notes: Vec<NoteProfile>,
    events: Vec<AccessLogEvent>,
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    Poisson::new(mean).expect("validated mean").sample(rng) as usize
}

fn generate_log(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    patient_id: &str,
    team: &[usize],
    pool: &[HcpProfile],
) -> PatientLog {
    let observation_end = TimeWindows::default().observation_end;
    let intents = WeightedIndex::new(INTENT_WEIGHTS).expect("static weights");
    let writer_dist = WeightedIndex::new(team.iter().map(|&h| {
        let boost = if pool[h].specialty == SPECIALTY_GENERAL_PRACTICE {
            GP_WRITER_BOOST
        } else {
            1.0
        };
        boost * WRITER_WEIGHT_BY_TITLE[pool[h].title]
    }))
    .expect("non-empty team with positive weights");

    let n_notes = poisson(rng, config.mean_notes_per_patient).max(1);
    // At most one inpatient stay; notes written during it are inpatient notes.
    let stay = rng.random_bool(INPATIENT_RATE).then(|| {
        let start = round_day(rng.random_range(LOG_START..observation_end - INPATIENT_DAYS));
        (start, start + INPATIENT_DAYS)
    });
    let mut notes = Vec::with_capacity(n_notes);
    let mut events = Vec::new();
    let mut write_times = Vec::with_capacity(n_notes);
    for k in 0..n_notes {
        let note_id = format!("{patient_id}-N{k:03}");
        let writer = team[writer_dist.sample(rng)];
        let content = specialty_content(pool[writer].specialty);
        let intent = if rng.random_bool(INTENT_FOLLOWS_TITLE) {
            INTENT_BY_TITLE[pool[writer].title]
        } else {
            intents.sample(rng)
        };
        notes.push(NoteProfile {
            note_id: note_id.clone(),
            intent,
            content,
            is_inpatient: false,
        });
        // The first note always lands in the observation window so every
        // team member can be guaranteed a visible access.
        let t_end = if k == 0 { observation_end } else { LOG_END };
        let t_write = round_day(rng.random_range(LOG_START..=t_end));
        write_times.push(t_write);
        notes[k].is_inpatient = stay.is_some_and(|(a, b)| (a..=b).contains(&t_write));
        events.push(AccessLogEvent {
            patient_id: patient_id.to_string(),
            hcp_id: pool[writer].hcp_id.clone(),
            note_id: note_id.clone(),
            action: Action::Write,
            t: t_write,
        });
        for _ in 0..poisson(rng, config.mean_reads_per_note) {
            let reader = team[rng.random_range(0..team.len())];
            let t = round_day(rng.random_range(t_write..=LOG_END)).max(t_write);
            events.push(AccessLogEvent {
                patient_id: patient_id.to_string(),
                hcp_id: pool[reader].hcp_id.clone(),
                note_id: note_id.clone(),
                action: Action::Read,
                t,
            });
        }
    }

    let early_notes: Vec<usize> = (0..n_notes)
        .filter(|&k| write_times[k] <= observation_end)
        .collect();
    for &member in team {
        let id = &pool[member].hcp_id;
        let visible = events
            .iter()
            .any(|e| &e.hcp_id == id && e.t <= observation_end);
        if visible {
            continue;
        }
        let k = early_notes[rng.random_range(0..early_notes.len())];
        let t_write = write_times[k];
        let t =
            round_day(rng.random_range(t_write..=observation_end)).clamp(t_write, observation_end);
        events.push(AccessLogEvent {
            patient_id: patient_id.to_string(),
            hcp_id: id.clone(),
            note_id: notes[k].note_id.clone(),
            action: Action::Read,
            t,
        });
    }
    // stable: a write precedes reads of the same note at equal t
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    PatientLog { notes, events }
}

pub fn generate_cohort(config: &SynthConfig) -> Result<Cohort> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pool = generate_pool(&mut rng, config.hcp_pool_size);

    let by_specialty = |pred: &dyn Fn(usize) -> bool| -> Vec<usize> {
        pool.iter()
            .enumerate()
            .filter(|(_, h)| pred(h.specialty))
            .map(|(i, _)| i)
            .collect()
    };
    let gps = by_specialty(&|s| s == SPECIALTY_GENERAL_PRACTICE);
    let core_by_specialty: Vec<Vec<usize>> = (0..N_SPECIALTIES)
        .map(|sp| {
            if CORE_SPECIALTIES.contains(&sp) {
                by_specialty(&|s| s == sp)
            } else {
                Vec::new()
            }
        })
        .collect();
    let specialists: Vec<Vec<usize>> = (0..N_COMORBIDITIES)
        .map(|c| by_specialty(&|s| s == proxy_specialty(c)))
        .collect();

    let age_dist = Normal::<f64>::new(64.0, 11.0).expect("static parameters");
    let noise = Normal::new(0.0, LOGIT_NOISE_SD).expect("static parameters");

    let mut cohort = Cohort {
        hcps: pool.clone(),
        ..Cohort::default()
    };
    let mut next_patient = 0usize;
    for cancer in CancerType::ALL {
        let plan = SeverityPlan::for_cancer(config, cancer);
        let tiers = WeightedIndex::new(plan.weights).expect("tier weights are non-negative");
        let female_rate = if cancer == CancerType::Breast {
            0.9
        } else {
            0.5
        };
        for _ in 0..config.patients_per_cancer {
            let patient_id = format!("P{next_patient:05}");
            next_patient += 1;

            let gender = if rng.random_bool(female_rate) {
                Gender::Female
            } else {
                Gender::Male
            };
            let cancer_stage = if rng.random_bool(0.5) {
                CancerStage::Stage3
            } else {
                CancerStage::Stage2
            };
            let age = age_dist.sample(&mut rng).round().clamp(25.0, 95.0) as u32;
            let insurance = if rng.random_bool(0.55) {
                Insurance::Private
            } else {
                Insurance::Public
            };

            let tier = tiers.sample(&mut rng);
            let k = TIER_K[tier];
            let mut comorbidities = vec![0u8; N_COMORBIDITIES];
            for c in sample_weighted(
                &mut rng,
                N_COMORBIDITIES,
                |c| COMORBIDITY_DECAY.powi(c as i32),
                k,
            )
            .expect("positive weights")
            {
                comorbidities[c] = 1;
            }

            let has_gp = !gps.is_empty() && rng.random_bool(GP_PARTICIPATION);
            let z = plan.intercept + config.gp_effect * f64::from(u8::from(has_gp))
                - config.comorbidity_effect * k as f64
                + noise.sample(&mut rng);
            let survived = rng.random::<f64>() < sigmoid(z);

            let mut team = BTreeSet::new();
            for &spec in core_team_specialties(cancer) {
                let members = &core_by_specialty[spec];
                if !members.is_empty() {
                    team.insert(members[rng.random_range(0..members.len())]);
                }
            }
            if has_gp {
                team.insert(gps[rng.random_range(0..gps.len())]);
            }
            for (c, &active) in comorbidities.iter().enumerate() {
                if active == 1 && !specialists[c].is_empty() {
                    team.insert(specialists[c][rng.random_range(0..specialists[c].len())]);
                }
            }
            if team.is_empty() {
                team.insert(rng.random_range(0..pool.len()));
            }
            let team: Vec<usize> = team.into_iter().collect();

            let log = generate_log(&mut rng, config, &patient_id, &team, &pool);
            cohort.notes.extend(log.notes);
            cohort.events.extend(log.events);
            cohort.patients.push(PatientRecord {
                patient_id,
                cancer_type: cancer,
                cancer_stage,
                gender,
                age,
                insurance,
                comorbidities,
                survived,
            });
        }
    }
    Ok(cohort)
}
