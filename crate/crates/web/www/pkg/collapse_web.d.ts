/* tslint:disable */
/* eslint-disable */

/**
 * Survival of the Bernoulli process: bounds and a Monte Carlo estimate of
 * `Pr(P_k != 0)` for `k = 1..=k_max`.
 */
export function bernoulli_survival(p0: number, n: number, k_max: number, trials: number, seed: number): string;

/**
 * `Pr(Σ_k > ε)` for the Gaussian process with unbiased variance
 * re-estimation, against the closed-form and optimised bounds.
 */
export function gaussian_collapse(sigma0: number, eps: number, n: number, k_max: number, trials: number, seed: number): string;

/**
 * Same for the symmetric two-component mixture under the approximate
 * joint ML estimator.
 */
export function mixture_collapse(mu0: number, sigma0: number, eps: number, n: number, k_max: number, trials: number, seed: number): string;

/**
 * Draws `n` samples from `½N(-μ,σ²) + ½N(μ,σ²)` and fits both estimators.
 */
export function mixture_fit(mu: number, sigma: number, n: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bernoulli_survival: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly gaussian_collapse: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly mixture_collapse: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly mixture_fit: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
