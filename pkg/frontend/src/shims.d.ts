declare module "bpmn-auto-layout" {
  export function layoutProcess(bpmnXml: string): Promise<string>;
}

declare module "bpmn-js/lib/NavigatedViewer" {
  export default class NavigatedViewer {
    constructor(options: { container: HTMLElement });
    importXML(xml: string): Promise<{ warnings: unknown[] }>;
    get(service: string): unknown;
    destroy(): void;
  }
}
