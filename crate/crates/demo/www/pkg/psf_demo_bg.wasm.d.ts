/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_eigenview_free: (a: number, b: number) => void;
export const eigenview_iters: (a: number) => number;
export const eigenview_lambda: (a: number) => number;
export const eigenview_values: (a: number) => [number, number];
export const lambda_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const ricci_curvature: (a: number, b: number, c: number) => [number, number, number, number];
export const solve_eigen: (a: number, b: number, c: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
