/** Wire types mirroring the service's JSON contract, field for field. */

export interface ThresholdBand {
  range: string;
  effect: string;
  acute_scale_reference: boolean;
}

export interface LimitFlag {
  name: string;
  window_start: string;
  window_end: string;
  observed_msv: number;
  limit_msv: number;
}

export interface ProfileRecord {
  record_id: string;
  performed_at: string;
  exam_type: string;
  modality: string;
  effective_msv: number;
  facility_id: string;
  operator_id: string;
  kind: string;
}

export interface AgeRisk {
  age_years: number;
  multiplier: number;
  risk_weighted_msv: number;
}

export interface ProfileResponse {
  patient_id: string;
  as_of: string;
  records: ProfileRecord[];
  cumulative_total_msv: number;
  window_sums_msv: Record<string, number>;
  threshold_band: ThresholdBand;
  chest_equivalents_total: number;
  age_risk: AgeRisk | null;
  limit_flags: LimitFlag[];
}

export interface WhatIfProjected {
  cumulative_total_msv: number;
  threshold_band: ThresholdBand;
  limit_flags: LimitFlag[];
  chest_equivalents_delta: number;
  chest_equivalents_total: number;
}

export interface WhatIfResponse {
  patient_id: string;
  proposed_exam: string;
  proposed_effective_msv: number;
  projected: WhatIfProjected;
  current: {
    cumulative_total_msv: number;
    threshold_band: ThresholdBand;
    chest_equivalents_total: number;
  };
}

export interface CatalogEntry {
  exam: string;
  display_name: string;
  effective_msv: number;
  chest_equivalents: number;
}

export interface CatalogResponse {
  entries: CatalogEntry[];
  pa_chest_msv: number;
}

export interface StatusResponse {
  role: string;
  replica_id: string;
  records: number;
  upstream_url: string | null;
  upstream_reachable: boolean | null;
  mode: string;
  engine_version: string;
}

export interface RecordedResponse {
  status: string;
  record_id: string;
  effective_msv: number;
  performed_at: string;
}
