// Wire types mirroring the scoring service's JSON API.

export const SYMPTOMS = [
  "cough", "sputum", "sore_throat", "dyspnea", "musculoskeletal_pain",
  "headache", "chill", "ageusia", "anosmia",
] as const;
export type SymptomName = (typeof SYMPTOMS)[number];

export const DISEASES = [
  "liver", "cancer", "diabetes", "cardio", "renal", "degenerative", "lung",
] as const;
export type DiseaseName = (typeof DISEASES)[number];

export const DISEASE_MAX: Record<DiseaseName, number> = {
  liver: 3, cancer: 5, diabetes: 1, cardio: 5, renal: 2, degenerative: 3, lung: 3,
};

/** Tri-state symptom answer; "unknown" is the default and maps to null on the wire. */
export type TriState = "yes" | "no" | "unknown";

export type Band = "low" | "moderate" | "high";

export interface AssessmentForm {
  sex: "male" | "female" | null;
  age: number | null;
  regionCode: string | null;
  bodyTemp: number | null; // optional measurement
  onsetMonth: number | null;
  symptoms: Record<SymptomName, TriState>;
  diseases: Record<DiseaseName, number>;
}

/** Request body for POST /v1/assess (CSV-schema field names). */
export interface AssessPayload {
  id?: string;
  sex: "male" | "female";
  age: number;
  latitude: number;
  longitude: number;
  body_temp: number | null;
  onset_month: number;
  cough: boolean | null;
  sputum: boolean | null;
  sore_throat: boolean | null;
  dyspnea: boolean | null;
  musculoskeletal_pain: boolean | null;
  headache: boolean | null;
  chill: boolean | null;
  ageusia: boolean | null;
  anosmia: boolean | null;
  liver: number;
  cancer: number;
  diabetes: number;
  cardio: number;
  renal: number;
  degenerative: number;
  lung: number;
}

export interface TopFactor {
  feature: string;
  phi: number;
  direction: "up" | "down" | "none";
  probability_delta: number;
}

export interface TriageDecision {
  probability: number;
  band: Band;
  recommendation: string;
  top_factors: TopFactor[];
  model_version: string;
  policy: BandPolicy;
  timestamp: string;
}

export interface BandPolicy {
  low_cut: number;
  high_cut: number;
}

export interface RegionEntry {
  code: string;
  latitude: number;
  longitude: number;
}

export interface ModelInfo {
  version: string;
  model_digest: string;
  feature_names: string[];
  policy: BandPolicy;
  regions: RegionEntry[];
}

export interface HistoryEntry {
  date: string; // YYYY-MM-DD
  form: AssessmentForm;
  decision: TriageDecision;
}

export function emptyForm(): AssessmentForm {
  const symptoms = Object.fromEntries(
    SYMPTOMS.map((s) => [s, "unknown" as TriState]),
  ) as Record<SymptomName, TriState>;
  const diseases = Object.fromEntries(
    DISEASES.map((d) => [d, 0]),
  ) as Record<DiseaseName, number>;
  return {
    sex: null,
    age: null,
    regionCode: null,
    bodyTemp: null,
    onsetMonth: null,
    symptoms,
    diseases,
  };
}
