/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_classification_free: (a: number, b: number) => void;
export const activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const areaFilter: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const classification_height: (a: number) => number;
export const classification_kappa: (a: number) => number;
export const classification_oa: (a: number) => number;
export const classification_predicted: (a: number) => [number, number];
export const classification_train_mask: (a: number) => [number, number];
export const classification_truth: (a: number) => [number, number];
export const classification_width: (a: number) => number;
export const classifyScene: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const imageSide: () => number;
export const patternImage: (a: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
