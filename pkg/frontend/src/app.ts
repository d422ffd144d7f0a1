// The researcher console: login, role-filtered catalog with generated
// parameter forms, tabular results with a raw-payload pane.
//
// The token lives only in this object (never persisted), so a page reload
// always lands back on the login view. Running a query fetches the JSON
// payload for the table; when the format toggle says xml, the raw pane is
// filled from a second fetch of the XML payload.

import { ApiError, CatalogEntry, GatewayClient, blockedParamFrom } from "./api.js";
import { describeError, isSessionEnd } from "./errors.js";
import {
  buildForm,
  clearFieldErrors,
  formValues,
  selectedFormat,
  showFieldError,
} from "./forms.js";
import { renderRawPane, renderResultTable, toggleRawPane } from "./table.js";

interface Session {
  username: string;
  token: string;
  expiresAt: number;
  catalog: CatalogEntry[];
}

export class ConsoleApp {
  private session: Session | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: GatewayClient,
  ) {}

  mount(): void {
    this.renderLogin();
  }

  get signedIn(): boolean {
    return this.session !== null;
  }

  // --- login view ---------------------------------------------------------

  private renderLogin(notice?: string): void {
    this.session = null;
    this.root.replaceChildren();
    const view = document.createElement("div");
    view.id = "login-view";
    view.innerHTML = `
      <h1>medgate console</h1>
      <p id="session-notice" class="notice" hidden></p>
      <form id="login-form">
        <label>username <input id="username" name="username" autocomplete="username"></label>
        <label>password <input id="password" name="password" type="password"></label>
        <button id="login-submit" type="submit">Sign in</button>
      </form>
      <p id="login-error" class="error-banner" hidden></p>
    `;
    this.root.appendChild(view);
    if (notice) {
      const slot = view.querySelector<HTMLElement>("#session-notice")!;
      slot.textContent = notice;
      slot.hidden = false;
    }
    view.querySelector<HTMLFormElement>("#login-form")!.addEventListener("submit", (event) => {
      event.preventDefault();
      const username = view.querySelector<HTMLInputElement>("#username")!.value.trim();
      const password = view.querySelector<HTMLInputElement>("#password")!.value;
      void this.handleLogin(username, password);
    });
  }

  private showLoginError(message: string): void {
    const slot = this.root.querySelector<HTMLElement>("#login-error");
    if (slot) {
      slot.textContent = message;
      slot.hidden = false;
    }
  }

  async handleLogin(username: string, password: string): Promise<void> {
    try {
      const grant = await this.client.login(username, password);
      const catalog = await this.client.catalog(grant.token);
      this.session = {
        username,
        token: grant.token,
        expiresAt: grant.expires_at,
        catalog,
      };
      this.renderCatalog();
    } catch (error) {
      this.showLoginError(describeError(error));
    }
  }

  // --- catalog view ---------------------------------------------------------

  private renderCatalog(): void {
    const session = this.session!;
    this.root.replaceChildren();
    const view = document.createElement("div");
    view.id = "catalog-view";

    const header = document.createElement("header");
    header.innerHTML = `<span id="whoami">signed in as ${session.username}</span>`;
    const logout = document.createElement("button");
    logout.id = "logout";
    logout.textContent = "Sign out";
    logout.addEventListener("click", () => this.renderLogin());
    header.appendChild(logout);
    view.appendChild(header);

    if (session.catalog.length === 0) {
      const empty = document.createElement("p");
      empty.id = "catalog-empty";
      empty.textContent = "No queries available for your role.";
      view.appendChild(empty);
    }

    const list = document.createElement("ul");
    list.id = "catalog-list";
    for (const entry of session.catalog) {
      list.appendChild(this.buildCard(entry));
    }
    view.appendChild(list);
    this.root.appendChild(view);
  }

  private buildCard(entry: CatalogEntry): HTMLLIElement {
    const card = document.createElement("li");
    card.className = "query-card";
    card.dataset.queryId = entry.query_id;

    const title = document.createElement("h2");
    title.textContent = entry.query_id;
    card.appendChild(title);
    const description = document.createElement("p");
    description.className = "description";
    description.textContent = entry.description;
    card.appendChild(description);

    const form = buildForm(entry);
    card.appendChild(form);

    const banner = document.createElement("p");
    banner.className = "query-error error-banner";
    banner.hidden = true;
    card.appendChild(banner);

    const rawToggle = document.createElement("button");
    rawToggle.className = "raw-toggle";
    rawToggle.textContent = "Raw payload";
    rawToggle.hidden = true;
    card.appendChild(rawToggle);

    const result = document.createElement("div");
    result.className = "result";
    card.appendChild(result);

    rawToggle.addEventListener("click", () => toggleRawPane(card));
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.handleRun(entry, form, card);
    });
    return card;
  }

  async handleRun(entry: CatalogEntry, form: HTMLFormElement, card: HTMLElement): Promise<void> {
    const session = this.session;
    if (!session) return;
    const submit = form.querySelector<HTMLButtonElement>(".run-query")!;
    if (submit.disabled) return; // incomplete form or a run already in flight
    const banner = card.querySelector<HTMLElement>(".query-error")!;
    const rawToggle = card.querySelector<HTMLButtonElement>(".raw-toggle")!;
    const result = card.querySelector<HTMLElement>(".result")!;

    clearFieldErrors(form);
    banner.hidden = true;
    submit.disabled = true;
    try {
      const values = formValues(form);
      const jsonPayload = await this.client.runQuery(session.token, entry, values, "json");
      renderResultTable(result, jsonPayload);
      const format = selectedFormat(form);
      const rawPayload =
        format === "xml"
          ? await this.client.runQuery(session.token, entry, values, "xml")
          : jsonPayload;
      renderRawPane(card, rawPayload);
      rawToggle.hidden = false;
    } catch (error) {
      if (isSessionEnd(error)) {
        this.renderLogin(describeError(error));
        return;
      }
      if (error instanceof ApiError && error.code === "input_blocked") {
        const param = blockedParamFrom(error);
        if (param) {
          showFieldError(form, param, describeError(error));
        } else {
          banner.textContent = describeError(error);
          banner.hidden = false;
        }
      } else {
        banner.textContent = describeError(error);
        banner.hidden = false;
      }
    } finally {
      if (this.session) {
        submit.disabled = false;
        form.dispatchEvent(new Event("input")); // re-evaluate completeness
      }
    }
  }
}

export interface ConsoleConfig {
  catalogUrl: string;
}

export function resolveConfig(): ConsoleConfig {
  const injected = (globalThis as { MEDGATE_CONFIG?: { catalogUrl?: string } }).MEDGATE_CONFIG;
  const url = injected?.catalogUrl ?? "http://127.0.0.1:8002";
  return { catalogUrl: url.replace(/\/+$/, "") };
}

export function bootstrap(root: HTMLElement, config: ConsoleConfig = resolveConfig()): ConsoleApp {
  const app = new ConsoleApp(root, new GatewayClient(config.catalogUrl));
  app.mount();
  return app;
}
