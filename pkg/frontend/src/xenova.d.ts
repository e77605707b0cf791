// Minimal ambient typing for the optional transformers.js runtime, so the
// package type-checks whether or not the optional dependency is installed.
declare module "@xenova/transformers" {
  export function pipeline(
    task: string,
    model?: string,
    options?: object
  ): Promise<unknown>;
}
