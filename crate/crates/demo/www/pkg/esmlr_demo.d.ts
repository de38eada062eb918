/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of fitting one classifier on a generated scene.
 */
export class Classification {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly height: number;
    readonly kappa: number;
    /**
     * Overall accuracy on the held-out pixels.
     */
    readonly oa: number;
    /**
     * Predicted class of every pixel, row-major.
     */
    readonly predicted: Uint8Array;
    /**
     * 1 where the pixel was used for training.
     */
    readonly train_mask: Uint8Array;
    /**
     * Reference class of every pixel, row-major.
     */
    readonly truth: Uint8Array;
    readonly width: number;
}

export function activationCurve(name: string, bias: number, from: number, to: number, samples: number): Float64Array;

export function areaFilter(levels: Uint8Array, height: number, width: number, lambda: number, thickening: boolean, connectivity: number): Uint8Array;

export function classifyScene(variant: string, classes: number, noise: number, per_class: number, hidden: number, seed: bigint): Classification;

export function imageSide(): number;

export function patternImage(seed: bigint): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_classification_free: (a: number, b: number) => void;
    readonly activationCurve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly areaFilter: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly classification_height: (a: number) => number;
    readonly classification_kappa: (a: number) => number;
    readonly classification_oa: (a: number) => number;
    readonly classification_predicted: (a: number) => [number, number];
    readonly classification_train_mask: (a: number) => [number, number];
    readonly classification_truth: (a: number) => [number, number];
    readonly classification_width: (a: number) => number;
    readonly classifyScene: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly imageSide: () => number;
    readonly patternImage: (a: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
