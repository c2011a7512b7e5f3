/* tslint:disable */
/* eslint-disable */

/**
 * First p-eigenpair of the conformal bump metric.
 */
export class EigenView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Eigenfunction values, row-major `n x n`.
     */
    values(): Float64Array;
    readonly iters: number;
    readonly lambda: number;
}

export function lambda_curve(n: number, amplitude: number, p: number, c0: number, samples: number): Float64Array;

export function ricci_curvature(n: number, amplitude: number, t: number): Float64Array;

export function solve_eigen(n: number, amplitude: number, p: number): EigenView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_eigenview_free: (a: number, b: number) => void;
    readonly eigenview_iters: (a: number) => number;
    readonly eigenview_lambda: (a: number) => number;
    readonly eigenview_values: (a: number) => [number, number];
    readonly lambda_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly ricci_curvature: (a: number, b: number, c: number) => [number, number, number, number];
    readonly solve_eigen: (a: number, b: number, c: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
