//! Fixed categorical vocabularies for HCP and note attributes.
//!
//! Cardinalities are fixed (7 titles, 12 types, 71 specialties, 5 intents,
//! 32 content categories). Only a handful of labels carry meaning for the
//! generator; they are pinned to stable indices. Any change to these lists
//! must bump [`TAXONOMY_VERSION`].

pub const TAXONOMY_VERSION: u32 = 1;

pub const N_TITLES: usize = 7;
pub const N_HCP_TYPES: usize = 12;
pub const N_SPECIALTIES: usize = 71;
pub const N_INTENTS: usize = 5;
pub const N_CONTENTS: usize = 32;
pub const N_COMORBIDITIES: usize = 39;

pub const TITLES: [&str; N_TITLES] = [
    "MD",
    "NP",
    "PA",
    "RN",
    "Pharmacy Technician",
    "Pharmacist",
    "Case Manager",
];

pub const TITLE_MD: usize = 0;
pub const TITLE_NP: usize = 1;
pub const TITLE_RN: usize = 3;

pub const HCP_TYPES: [&str; N_HCP_TYPES] = [
    "Physician Faculty",
    "Physician Fellow",
    "Physician Resident",
    "Advanced Practice Provider",
    "Staff Nurse",
    "Nurse Navigator",
    "Charge Nurse",
    "Clinical Pharmacist",
    "Pharmacy Support",
    "Care Coordinator",
    "Social Work",
    "Other Clinical Staff",
];

pub const SPECIALTY_GENERAL_PRACTICE: usize = 0;
pub const SPECIALTY_CARDIOLOGY: usize = 1;
pub const SPECIALTY_EMERGENCY_MEDICINE: usize = 2;

/// Specialties 3..=12 staff the core oncology teams.
pub const CORE_SPECIALTIES: std::ops::RangeInclusive<usize> = 3..=12;

pub const SPECIALTIES: [&str; N_SPECIALTIES] = [
    "General Practice",
    "Cardiology",
    "Emergency Medicine",
    "Medical Oncology",
    "Radiation Oncology",
    "Surgical Oncology",
    "Breast Surgery",
    "Thoracic Surgery",
    "Colorectal Surgery",
    "Pathology",
    "Diagnostic Radiology",
    "Oncology Nursing",
    "Palliative Care",
    "Endocrinology",
    "Nephrology",
    "Pulmonology",
    "Gastroenterology",
    "Hepatology",
    "Neurology",
    "Psychiatry",
    "Rheumatology",
    "Dermatology",
    "Infectious Disease",
    "Hematology",
    "Vascular Surgery",
    "Orthopedics",
    "Urology",
    "Ophthalmology",
    "Otolaryngology",
    "Geriatrics",
    "Allergy and Immunology",
    "Sleep Medicine",
    "Pain Medicine",
    "Physical Medicine",
    "Obstetrics and Gynecology",
    "Wound Care",
    "Nutrition",
    "Podiatry",
    "Addiction Medicine",
    "Interventional Radiology",
    "Critical Care",
    "Anesthesiology",
    "Hospital Medicine",
    "Internal Medicine",
    "Family Medicine Residency Clinic",
    "Plastic Surgery",
    "Neurosurgery",
    "General Surgery",
    "Transplant",
    "Genetics",
    "Nuclear Medicine",
    "Sports Medicine",
    "Occupational Health",
    "Dental",
    "Audiology",
    "Speech Pathology",
    "Respiratory Therapy",
    "Physical Therapy",
    "Occupational Therapy",
    "Social Services",
    "Chaplaincy",
    "Home Health",
    "Hospice",
    "Ambulatory Pharmacy",
    "Inpatient Pharmacy",
    "Infusion Services",
    "Care Management",
    "Patient Navigation",
    "Laboratory Medicine",
    "Telehealth",
    "Unassigned",
];

pub const INTENTS: [&str; N_INTENTS] = [
    "Orders",
    "Patient Clinical Information",
    "Results",
    "Communication",
    "Administrative",
];

pub const CONTENTS: [&str; N_CONTENTS] = [
    "Order Canceled",
    "Note Signed",
    "Progress Note",
    "History and Physical",
    "Consult Note",
    "Discharge Summary",
    "Procedure Note",
    "Operative Note",
    "Pathology Report",
    "Imaging Report",
    "Lab Result",
    "Medication Order",
    "Medication Reconciliation",
    "Chemotherapy Plan",
    "Radiation Plan",
    "Nursing Assessment",
    "Care Plan",
    "Telephone Encounter",
    "Patient Instructions",
    "Referral",
    "Tumor Board Summary",
    "Treatment Summary",
    "Symptom Assessment",
    "Nutrition Assessment",
    "Social Work Note",
    "Pharmacy Review",
    "Case Management Note",
    "Addendum",
    "Letter",
    "Order Placed",
    "Result Acknowledged",
    "Miscellaneous",
];

/// Comorbidities 0..=3 are cardiac, 4..=5 acute; the rest map one-to-one onto
/// specialties starting at index 13.
pub fn proxy_specialty(comorbidity: usize) -> usize {
    debug_assert!(comorbidity < N_COMORBIDITIES);
    match comorbidity {
        0..=3 => SPECIALTY_CARDIOLOGY,
        4..=5 => SPECIALTY_EMERGENCY_MEDICINE,
        c => 13 + (c - 6),
    }
}

/// Distinct specialties that stand in for comorbidities, in index order.
pub fn proxy_specialties() -> Vec<usize> {
    let mut s: Vec<usize> = (0..N_COMORBIDITIES).map(proxy_specialty).collect();
    s.dedup();
    s
}
